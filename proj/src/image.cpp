#include "synocc/image.hpp"

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace synocc {

Image::Image(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0) throw std::invalid_argument("Image: negative dimensions");
  if (channels != 1 && channels != 3 && channels != 4) {
    throw std::invalid_argument("Image: channels must be 1, 3 or 4");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageIoError("cannot open " + path.string());
  return f;
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  if (message) *message = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::string message;

  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
    if (!png) throw ImageIoError("png_create_read_struct failed");
    info = png_create_info_struct(png);
    if (!info) {
      png_destroy_read_struct(&png, nullptr, nullptr);
      throw ImageIoError("png_create_info_struct failed");
    }
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;
};

enum class PngMode { kColor, kIndexed };

Image read_png_impl(const std::filesystem::path& path, PngMode mode) {
  FilePtr file = open_file(path, "rb");
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), file.get()) != sig.size() ||
      png_sig_cmp(sig.data(), 0, sig.size()) != 0) {
    throw ImageIoError("not a PNG file: " + path.string());
  }

  PngReader reader;
  Image out;
  std::vector<png_bytep> rows;
  // Nothing with a nontrivial destructor may be created between setjmp and the
  // last libpng call.
  if (setjmp(png_jmpbuf(reader.png))) {
    throw ImageIoError("PNG decode error in " + path.string() + ": " + reader.message);
  }
  png_init_io(reader.png, file.get());
  png_set_sig_bytes(reader.png, 8);
  png_read_info(reader.png, reader.info);

  const png_uint_32 width = png_get_image_width(reader.png, reader.info);
  const png_uint_32 height = png_get_image_height(reader.png, reader.info);
  const int color_type = png_get_color_type(reader.png, reader.info);
  const int bit_depth = png_get_bit_depth(reader.png, reader.info);

  int channels = 0;
  if (mode == PngMode::kIndexed) {
    if (color_type != PNG_COLOR_TYPE_PALETTE && color_type != PNG_COLOR_TYPE_GRAY) {
      throw ImageIoError("expected palette or gray PNG: " + path.string());
    }
    if (bit_depth < 8) png_set_packing(reader.png);
    if (bit_depth == 16) png_set_strip_16(reader.png);
    channels = 1;
  } else {
    if (bit_depth == 16) png_set_strip_16(reader.png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(reader.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(reader.png);
    if (png_get_valid(reader.png, reader.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(reader.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_gray_to_rgb(reader.png);
    }
    png_read_update_info(reader.png, reader.info);
    channels = png_get_channels(reader.png, reader.info);
  }
  if (mode == PngMode::kIndexed) png_read_update_info(reader.png, reader.info);

  out = Image(static_cast<int>(width), static_cast<int>(height), channels);
  rows.resize(height);
  auto bytes = out.data();
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = bytes.data() + static_cast<std::size_t>(y) * width * channels;
  }
  png_read_image(reader.png, rows.data());
  png_read_end(reader.png, nullptr);
  return out;
}

// VOC palette: bit-interleaved color map, index 255 rendered as (224, 224, 192).
std::array<png_color, 256> voc_palette() {
  std::array<png_color, 256> palette{};
  for (int i = 0; i < 256; ++i) {
    int r = 0, g = 0, b = 0, c = i;
    for (int j = 0; j < 8; ++j) {
      r |= ((c >> 0) & 1) << (7 - j);
      g |= ((c >> 1) & 1) << (7 - j);
      b |= ((c >> 2) & 1) << (7 - j);
      c >>= 3;
    }
    palette[i] = png_color{static_cast<png_byte>(r), static_cast<png_byte>(g), static_cast<png_byte>(b)};
  }
  return palette;
}

struct PngWriteTarget {
  std::FILE* file = nullptr;
  std::vector<std::uint8_t>* buffer = nullptr;
};

void png_write_to_buffer(png_structp png, png_bytep data, png_size_t length) {
  auto* target = static_cast<PngWriteTarget*>(png_get_io_ptr(png));
  target->buffer->insert(target->buffer->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

void write_png_impl(PngWriteTarget target, const Image& image, bool indexed) {
  if (image.empty()) throw ImageIoError("cannot encode empty image");
  std::string message;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw ImageIoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ImageIoError("png_create_info_struct failed");
  }
  const auto palette = voc_palette();
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("PNG encode error: " + message);
  }
  if (target.buffer) {
    png_set_write_fn(png, &target, png_write_to_buffer, png_flush_noop);
  } else {
    png_init_io(png, target.file);
  }
  int color_type = PNG_COLOR_TYPE_RGB;
  if (indexed) {
    color_type = PNG_COLOR_TYPE_PALETTE;
  } else if (image.channels() == 4) {
    color_type = PNG_COLOR_TYPE_RGB_ALPHA;
  } else if (image.channels() == 1) {
    color_type = PNG_COLOR_TYPE_GRAY;
  }
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (indexed) png_set_PLTE(png, info, palette.data(), static_cast<int>(palette.size()));
  png_write_info(png, info);
  const auto bytes = image.data();
  const std::size_t stride = static_cast<std::size_t>(image.width()) * image.channels();
  for (int y = 0; y < image.height(); ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(bytes.data() + y * stride);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_png(const std::filesystem::path& path) { return read_png_impl(path, PngMode::kColor); }

Image read_png_indexed(const std::filesystem::path& path) {
  return read_png_impl(path, PngMode::kIndexed);
}

void write_png(const std::filesystem::path& path, const Image& image) {
  FilePtr file = open_file(path, "wb");
  write_png_impl(PngWriteTarget{file.get(), nullptr}, image, false);
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  std::vector<std::uint8_t> buffer;
  write_png_impl(PngWriteTarget{nullptr, &buffer}, image, false);
  return buffer;
}

void write_png_indexed(const std::filesystem::path& path, const Image& indices) {
  if (indices.channels() != 1) throw ImageIoError("indexed PNG needs a one-channel image");
  FilePtr file = open_file(path, "wb");
  write_png_impl(PngWriteTarget{file.get(), nullptr}, indices, true);
}

namespace {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace

Image read_jpeg(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  Image out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ImageIoError("JPEG decode error in " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out = Image(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height), 3);
  auto bytes = out.data();
  const std::size_t stride = static_cast<std::size_t>(cinfo.output_width) * 3;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = bytes.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

void write_jpeg(const std::filesystem::path& path, const Image& image, int quality) {
  if (image.channels() != 3) throw ImageIoError("JPEG writer needs an RGB image");
  FilePtr file = open_file(path, "wb");
  jpeg_compress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw ImageIoError("JPEG encode error in " + path.string() + ": " + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, file.get());
  cinfo.image_width = static_cast<JDIMENSION>(image.width());
  cinfo.image_height = static_cast<JDIMENSION>(image.height());
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const auto bytes = image.data();
  const std::size_t stride = static_cast<std::size_t>(image.width()) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(bytes.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

Image read_color_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  Image img;
  if (ext == ".png") {
    img = read_png(path);
  } else if (ext == ".jpg" || ext == ".jpeg") {
    img = read_jpeg(path);
  } else {
    throw ImageIoError("unsupported image extension: " + path.string());
  }
  if (img.channels() == 4) {
    Image rgb(img.width(), img.height(), 3);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = img.at(x, y, c);
      }
    }
    return rgb;
  }
  return img;
}

}  // namespace synocc
