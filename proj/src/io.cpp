#include "asyncdsb/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <json.hpp>

#include "asyncdsb/error.hpp"
#include "text_util.hpp"

namespace asyncdsb {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode) {
  if (path.empty()) throw IoError("empty path");
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

// libpng reports errors by longjmp. The functions holding a setjmp touch
// only trivially destructible state; buffers are owned by their callers.
struct PngCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  char error[256] = {};
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngCtx*>(png_get_error_ptr(png));
  std::snprintf(ctx->error, sizeof ctx->error, "%s", msg);
  png_longjmp(png, 1);
}
void png_warn_fn(png_structp, png_const_charp) {}

struct PngHeader {
  png_uint_32 h = 0, w = 0;
  int channels = 0;
  int bit_depth = 0;
  std::size_t rowbytes = 0;
};

bool png_read_header(PngCtx* ctx, std::FILE* f, PngHeader* out) {
  if (setjmp(png_jmpbuf(ctx->png))) return false;
  png_init_io(ctx->png, f);
  png_set_sig_bytes(ctx->png, 8);
  png_read_info(ctx->png, ctx->info);
  const int color = png_get_color_type(ctx->png, ctx->info);
  const int depth = png_get_bit_depth(ctx->png, ctx->info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx->png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(ctx->png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ctx->png);
  png_read_update_info(ctx->png, ctx->info);
  out->h = png_get_image_height(ctx->png, ctx->info);
  out->w = png_get_image_width(ctx->png, ctx->info);
  out->channels = png_get_channels(ctx->png, ctx->info);
  out->bit_depth = png_get_bit_depth(ctx->png, ctx->info);
  out->rowbytes = png_get_rowbytes(ctx->png, ctx->info);
  return true;
}

bool png_read_rows(PngCtx* ctx, png_bytepp rows) {
  if (setjmp(png_jmpbuf(ctx->png))) return false;
  png_read_image(ctx->png, rows);
  png_read_end(ctx->png, nullptr);
  return true;
}

bool png_write_all(PngCtx* ctx, std::FILE* f, const PngHeader* hdr, png_bytepp rows) {
  if (setjmp(png_jmpbuf(ctx->png))) return false;
  png_init_io(ctx->png, f);
  png_set_IHDR(ctx->png, ctx->info, hdr->w, hdr->h, hdr->bit_depth,
               hdr->channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx->png, ctx->info);
  png_write_image(ctx->png, rows);
  png_write_end(ctx->png, nullptr);
  return true;
}

struct Raster {
  std::size_t h = 0, w = 0, c = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

Raster read_raster(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("not a PNG file: " + path.string());
  }
  PngCtx ctx;
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, png_error_fn, png_warn_fn);
  if (!ctx.png) throw IoError("png_create_read_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  struct Guard {
    PngCtx& c;
    ~Guard() { png_destroy_read_struct(&c.png, &c.info, nullptr); }
  } guard{ctx};
  if (!ctx.info) throw IoError("png_create_info_struct failed");

  PngHeader hdr;
  if (!png_read_header(&ctx, f.get(), &hdr)) {
    throw IoError("png " + path.string() + ": " + ctx.error);
  }
  std::vector<png_byte> buf(hdr.rowbytes * hdr.h);
  std::vector<png_bytep> rows(hdr.h);
  for (std::size_t i = 0; i < hdr.h; ++i) rows[i] = buf.data() + i * hdr.rowbytes;
  if (!png_read_rows(&ctx, rows.data())) {
    throw IoError("png " + path.string() + ": " + ctx.error);
  }

  Raster r{hdr.h, hdr.w, static_cast<std::size_t>(hdr.channels), hdr.bit_depth, {}};
  const std::size_t per_row = r.w * r.c;
  r.samples.resize(r.h * per_row);
  for (std::size_t i = 0; i < r.h; ++i) {
    for (std::size_t k = 0; k < per_row; ++k) {
      r.samples[i * per_row + k] =
          r.bit_depth == 16
              ? static_cast<std::uint16_t>((rows[i][2 * k] << 8) | rows[i][2 * k + 1])
              : rows[i][k];
    }
  }
  return r;
}

void write_raster(const Raster& r, const std::filesystem::path& path) {
  const std::size_t per_row = r.w * r.c;
  const std::size_t rowbytes = per_row * (r.bit_depth == 16 ? 2 : 1);
  std::vector<png_byte> buf(rowbytes * r.h);
  std::vector<png_bytep> rows(r.h);
  for (std::size_t i = 0; i < r.h; ++i) {
    rows[i] = buf.data() + i * rowbytes;
    for (std::size_t k = 0; k < per_row; ++k) {
      const std::uint16_t v = r.samples[i * per_row + k];
      if (r.bit_depth == 16) {
        rows[i][2 * k] = static_cast<png_byte>(v >> 8);  // PNG is big-endian
        rows[i][2 * k + 1] = static_cast<png_byte>(v & 0xff);
      } else {
        rows[i][k] = static_cast<png_byte>(v);
      }
    }
  }

  auto f = open_file(path, "wb");
  PngCtx ctx;
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, png_error_fn, png_warn_fn);
  if (!ctx.png) throw IoError("png_create_write_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  struct Guard {
    PngCtx& c;
    ~Guard() { png_destroy_write_struct(&c.png, &c.info); }
  } guard{ctx};
  if (!ctx.info) throw IoError("png_create_info_struct failed");

  const PngHeader hdr{static_cast<png_uint_32>(r.h), static_cast<png_uint_32>(r.w),
                      static_cast<int>(r.c), r.bit_depth, rowbytes};
  if (!png_write_all(&ctx, f.get(), &hdr, rows.data())) {
    throw IoError("png " + path.string() + ": " + ctx.error);
  }
}

std::uint16_t quantize(double v, double levels) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * levels));
}

nlohmann::json read_sidecar(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(detail::read_text(sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar for " + path.string() + ": " + e.what());
  }
}

void write_sidecar(const std::filesystem::path& path, const nlohmann::json& j) {
  detail::write_text(sidecar_path(path), j.dump(2) + "\n");
}

std::uint32_t byteswap32(std::uint32_t u) {
  return (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
}

std::vector<float> to_le_floats(std::span<const double> v) {
  std::vector<float> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = static_cast<float>(v[k]);
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& x : out) x = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(x)));
  }
  return out;
}

std::vector<double> from_le_floats(const std::string& bytes, std::size_t n) {
  if (bytes.size() != n * 4) throw IoError("raw tensor size does not match its sidecar");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint32_t u;
    std::memcpy(&u, bytes.data() + 4 * k, 4);
    if constexpr (std::endian::native == std::endian::big) u = byteswap32(u);
    out[k] = static_cast<double>(std::bit_cast<float>(u));
  }
  return out;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

ImageTensor load_png(const std::filesystem::path& path) {
  const auto r = read_raster(path);
  const double levels = r.bit_depth == 16 ? 65535.0 : 255.0;
  if (r.c != 1 && r.c != 3) throw IoError("unsupported PNG channel layout");
  std::vector<double> data(r.samples.size());
  for (std::size_t k = 0; k < data.size(); ++k) data[k] = r.samples[k] / levels;
  return ImageTensor(r.h, r.w, r.c, std::move(data));
}

void save_png(const ImageTensor& img, const std::filesystem::path& path) {
  if (img.channels() != 1 && img.channels() != 3) throw ValidationError("PNG needs 1 or 3 channels");
  Raster r{img.height(), img.width(), img.channels(), 8, {}};
  r.samples.resize(img.size());
  for (std::size_t k = 0; k < img.size(); ++k) r.samples[k] = quantize(img[k], 255.0);
  write_raster(r, path);
}

void save_png16(const ImageTensor& img, const std::filesystem::path& path) {
  if (img.channels() != 1) throw ValidationError("16-bit PNG output is grayscale only");
  Raster r{img.height(), img.width(), 1, 16, {}};
  r.samples.resize(img.size());
  for (std::size_t k = 0; k < img.size(); ++k) r.samples[k] = quantize(img[k], 65535.0);
  write_raster(r, path);
}

Mask load_mask_png(const std::filesystem::path& path) {
  const auto r = read_raster(path);
  const double half = r.bit_depth == 16 ? 32768.0 : 128.0;
  std::vector<std::uint8_t> bits(r.h * r.w);
  for (std::size_t p = 0; p < bits.size(); ++p) bits[p] = r.samples[p * r.c] >= half ? 1 : 0;
  return Mask(r.h, r.w, std::move(bits));
}

void save_mask_png(const Mask& m, const std::filesystem::path& path) {
  Raster r{m.height(), m.width(), 1, 8, {}};
  r.samples.resize(m.pixels());
  for (std::size_t p = 0; p < m.pixels(); ++p) r.samples[p] = m[p] ? 255 : 0;
  write_raster(r, path);
}

template <class Tag>
MapRange save_map_png16(const Plane<Tag>& map, const std::filesystem::path& path) {
  MapRange range{0.0, 0.0};
  if (map.pixels() > 0) {
    const auto [lo, hi] = std::minmax_element(map.values().begin(), map.values().end());
    range = {*lo, *hi};
  }
  const double span = range.max - range.min;
  Raster r{map.height(), map.width(), 1, 16, {}};
  r.samples.resize(map.pixels());
  for (std::size_t p = 0; p < map.pixels(); ++p) {
    r.samples[p] = span > 0.0 ? quantize((map[p] - range.min) / span, 65535.0) : 0;
  }
  write_raster(r, path);
  write_sidecar(path, {{"min", range.min}, {"max", range.max}, {"h", map.height()},
                       {"w", map.width()}});
  return range;
}

template <class Tag>
Plane<Tag> load_map_png16(const std::filesystem::path& path) {
  const auto r = read_raster(path);
  if (r.c != 1) throw IoError("map PNG must be grayscale");
  const auto side = read_sidecar(path);
  const double lo = side.at("min").get<double>();
  const double hi = side.at("max").get<double>();
  const double levels = r.bit_depth == 16 ? 65535.0 : 255.0;
  Plane<Tag> out(r.h, r.w);
  for (std::size_t p = 0; p < out.pixels(); ++p) out[p] = lo + (hi - lo) * (r.samples[p] / levels);
  return out;
}

template MapRange save_map_png16(const GradientMap&, const std::filesystem::path&);
template MapRange save_map_png16(const TauMap&, const std::filesystem::path&);
template GradientMap load_map_png16(const std::filesystem::path&);
template TauMap load_map_png16(const std::filesystem::path&);

void save_raw(const Tensor& t, const std::filesystem::path& path) {
  const auto floats = to_le_floats(t.values());
  detail::write_bytes(path, floats.data(), floats.size() * sizeof(float));
  write_sidecar(path, {{"h", t.height()}, {"w", t.width()}, {"c", t.channels()},
                       {"order", "row-major"}});
}

template <class Tag>
void save_raw(const Plane<Tag>& map, const std::filesystem::path& path) {
  save_raw(Tensor(map.height(), map.width(), 1,
                  std::vector<double>(map.values().begin(), map.values().end())),
           path);
}
template void save_raw(const GradientMap&, const std::filesystem::path&);
template void save_raw(const TauMap&, const std::filesystem::path&);

Tensor load_raw(const std::filesystem::path& path) {
  const auto side = read_sidecar(path);
  const auto h = side.at("h").get<std::size_t>();
  const auto w = side.at("w").get<std::size_t>();
  const auto c = side.at("c").get<std::size_t>();
  return Tensor(h, w, c, from_le_floats(detail::read_text(path), h * w * c));
}

void save_trajectory_raw(const Trajectory& traj, const std::filesystem::path& path) {
  if (traj.entries.empty()) throw ValidationError("empty trajectory");
  const auto& first = traj.entries.front().state;
  std::vector<float> all;
  all.reserve(first.size() * traj.entries.size());
  nlohmann::json steps = nlohmann::json::array();
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& e : traj.entries) {
    const auto f = to_le_floats(e.state.values());
    all.insert(all.end(), f.begin(), f.end());
    steps.push_back(e.step);
    ts.push_back(e.t);
  }
  detail::write_bytes(path, all.data(), all.size() * sizeof(float));
  write_sidecar(path, {{"h", first.height()},
                       {"w", first.width()},
                       {"c", first.channels()},
                       {"order", "row-major"},
                       {"count", traj.entries.size()},
                       {"T", traj.steps},
                       {"steps", steps},
                       {"ts", ts}});
}

Trajectory load_trajectory_raw(const std::filesystem::path& path) {
  const auto side = read_sidecar(path);
  const auto h = side.at("h").get<std::size_t>();
  const auto w = side.at("w").get<std::size_t>();
  const auto c = side.at("c").get<std::size_t>();
  const auto count = side.at("count").get<std::size_t>();
  const std::size_t n = h * w * c;
  const auto values = from_le_floats(detail::read_text(path), n * count);
  Trajectory traj;
  traj.steps = side.at("T").get<std::size_t>();
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> chunk(values.begin() + static_cast<std::ptrdiff_t>(k * n),
                              values.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
    traj.entries.push_back({side.at("steps").at(k).get<std::size_t>(),
                            side.at("ts").at(k).get<double>(), Tensor(h, w, c, std::move(chunk))});
  }
  return traj;
}

}  // namespace asyncdsb
