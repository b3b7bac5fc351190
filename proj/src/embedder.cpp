#include "wvt/embedder.hpp"

#include <algorithm>
#include <cmath>

#include "wvt/binary_io.hpp"

namespace wvt {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint64_t kDropoutStream = 0xd0;

void affine(MatrixView<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    double acc = b[r];
    const double* wr = w.data + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (input_width == 0 || video_width == 0 || text_width == 0)
    throw ConfigError("model widths must be >= 1");
  for (auto w : hidden_widths)
    if (w == 0) throw ConfigError("hidden widths must be >= 1");
  if (sources.empty()) throw ConfigError("model needs at least one metadata source");
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = i + 1; j < sources.size(); ++j)
      if (sources[i] == sources[j]) throw ConfigError("duplicate source in model config");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("dropout rate must be in [0, 1)");
}

ParameterLayout::ParameterLayout(const ModelConfig& cfg) {
  std::size_t in = cfg.input_width;
  auto add = [&](std::size_t rows, std::size_t cols) {
    Block b{total_, rows, cols};
    total_ += rows * cols;
    return b;
  };
  std::vector<std::size_t> outs = cfg.hidden_widths;
  outs.push_back(cfg.video_width);
  for (auto out : outs) {
    layer_w_.push_back(add(out, in));
    layer_b_.push_back(add(out, 1));
    in = out;
  }
  for (Source s : cfg.sources) {
    source_w_[index_of(s)] = add(cfg.text_width, cfg.video_width);
    source_b_[index_of(s)] = add(cfg.text_width, 1);
  }
}

const Block& ParameterLayout::source_weight(Source s) const {
  if (!has_source(s)) throw ConfigError("model has no head for source " + std::string(source_name(s)));
  return *source_w_[index_of(s)];
}

const Block& ParameterLayout::source_bias(Source s) const {
  if (!has_source(s)) throw ConfigError("model has no head for source " + std::string(source_name(s)));
  return *source_b_[index_of(s)];
}

std::vector<std::uint8_t> ParameterLayout::bias_mask() const {
  std::vector<std::uint8_t> mask(total_, 0);
  auto mark = [&](const Block& b) {
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size(), 1);
  };
  for (const auto& b : layer_b_) mark(b);
  for (const auto& b : source_b_)
    if (b) mark(*b);
  return mask;
}

EmbeddingModel::EmbeddingModel(ModelConfig cfg, Vec params)
    : cfg_(std::move(cfg)), layout_(cfg_), params_(std::move(params)),
      rng_(mix_seed(cfg_.seed, kDropoutStream)) {
  cfg_.validate();
  if (params_.size() != layout_.size())
    throw DataError("parameter count " + std::to_string(params_.size()) + " does not match layout " +
                    std::to_string(layout_.size()));
  for (double p : params_)
    if (!std::isfinite(p)) throw DataError("non-finite model parameter");
}

EmbeddingModel init_model(const ModelConfig& cfg) {
  cfg.validate();
  ParameterLayout layout(cfg);
  Vec params(layout.size(), 0.0);
  Rng rng(cfg.seed);
  auto fill = [&](const Block& w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    for (std::size_t i = 0; i < w.size(); ++i) params[w.offset + i] = rng.uniform(-bound, bound);
  };
  for (std::size_t l = 0; l < layout.layer_count(); ++l) fill(layout.layer_weight(l));
  for (Source s : cfg.sources) fill(layout.source_weight(s));
  return EmbeddingModel(cfg, std::move(params));
}

Vec draw_dropout_mask(Rng& rng, std::size_t width, double rate) {
  Vec mask(width, 1.0);
  if (rate <= 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = rng.uniform01() < rate ? 0.0 : keep_scale;
  return mask;
}

HeadTrace trace_video(const EmbeddingModel& model, std::span<const double> x,
                      std::span<const double> mask) {
  const auto& cfg = model.config();
  const auto& layout = model.layout();
  if (x.size() != cfg.input_width)
    throw DataError("feature width mismatch: expected " + std::to_string(cfg.input_width) +
                    ", got " + std::to_string(x.size()));
  if (!mask.empty() && mask.size() != cfg.video_width) throw DataError("dropout mask width mismatch");
  for (double v : x)
    if (!std::isfinite(v)) throw DataError("non-finite video feature");

  auto params = model.parameters();
  HeadTrace t;
  t.out.emplace_back(x.begin(), x.end());
  const std::size_t layers = layout.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto w = view(params, layout.layer_weight(l));
    const auto b = view(params, layout.layer_bias(l)).flat();
    Vec z(w.rows);
    affine(w, b, t.out.back(), z);
    t.pre.push_back(z);
    if (l + 1 < layers) {
      for (auto& v : z) v = std::max(0.0, v);
    }
    t.out.push_back(std::move(z));
  }
  t.f_v = t.out.back();
  if (!mask.empty())
    for (std::size_t i = 0; i < t.f_v.size(); ++i) t.f_v[i] *= mask[i];
  return t;
}

Vec forward_video(EmbeddingModel& model, std::span<const double> x, Mode mode) {
  if (mode == Mode::Eval) return trace_video(model, x, {}).f_v;
  const Vec mask = draw_dropout_mask(model.rng(), model.config().video_width, model.config().dropout_rate);
  return trace_video(model, x, mask).f_v;
}

Vec forward_video(const EmbeddingModel& model, std::span<const double> x) {
  return trace_video(model, x, {}).f_v;
}

Vec predict_metadata(const EmbeddingModel& model, std::span<const double> f_v, Source s) {
  const auto& layout = model.layout();
  if (f_v.size() != model.config().video_width) throw DataError("f_v width mismatch");
  auto params = model.parameters();
  const auto w = view(params, layout.source_weight(s));
  const auto b = view(params, layout.source_bias(s)).flat();
  Vec out(w.rows);
  affine(w, b, f_v, out);
  return out;
}

std::string encode_checkpoint(const EmbeddingModel& model, const TrainerState* state) {
  const auto& cfg = model.config();
  io::ByteWriter w;
  w.raw("WVTC");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(cfg.input_width));
  w.u32(static_cast<std::uint32_t>(cfg.hidden_widths.size()));
  for (auto h : cfg.hidden_widths) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(cfg.video_width));
  w.u32(static_cast<std::uint32_t>(cfg.text_width));
  w.f64(cfg.dropout_rate);
  w.u64(cfg.seed);
  w.u32(static_cast<std::uint32_t>(cfg.sources.size()));
  for (Source s : cfg.sources) w.u8(static_cast<std::uint8_t>(s));
  const auto params = model.parameters();
  w.u64(params.size());
  for (double p : params) w.f64(p);
  const std::string rng_state = model.rng().state();
  w.u32(static_cast<std::uint32_t>(rng_state.size()));
  w.raw(rng_state);
  w.u8(state ? 1 : 0);
  if (state) {
    if (state->velocity.size() != params.size()) throw DataError("velocity/parameter size mismatch");
    w.u64(state->step);
    for (double v : state->velocity) w.f64(v);
  }
  return w.bytes();
}

Checkpoint decode_checkpoint(std::string bytes, const std::string& what) {
  io::ByteReader r(std::move(bytes), what);
  r.expect_magic("WVTC");
  if (const auto v = r.u32(); v != kCheckpointVersion) r.fail("unsupported version " + std::to_string(v));
  ModelConfig cfg;
  cfg.input_width = r.u32();
  const auto layers = r.u32();
  if (layers > (r.size() - r.position()) / 4) r.fail("layer count " + std::to_string(layers) + " exceeds file length");
  cfg.hidden_widths.resize(layers);
  for (auto& h : cfg.hidden_widths) h = r.u32();
  cfg.video_width = r.u32();
  cfg.text_width = r.u32();
  cfg.dropout_rate = r.f64();
  cfg.seed = r.u64();
  const auto source_count = r.u32();
  if (source_count > kSourceCount) r.fail("bad source count " + std::to_string(source_count));
  cfg.sources.resize(source_count);
  for (auto& s : cfg.sources) {
    const auto id = r.u8();
    if (id >= kSourceCount) r.fail("bad source id " + std::to_string(id));
    s = static_cast<Source>(id);
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  const ParameterLayout layout(cfg);
  const auto count = r.u64();
  if (count != layout.size())
    r.fail("parameter count " + std::to_string(count) + " does not match widths (" +
           std::to_string(layout.size()) + ")");
  if (count > (r.size() - r.position()) / 8)
    r.fail("truncated: expected at least " + std::to_string(r.position() + 8 * count) + " bytes, file has " +
           std::to_string(r.size()));
  Vec params(count);
  for (auto& p : params) p = r.f64();
  std::string rng_state = r.raw(r.u32());
  EmbeddingModel model(std::move(cfg), std::move(params));
  model.rng().restore(rng_state);
  Checkpoint ck{std::move(model), std::nullopt};
  const auto has_state = r.u8();
  if (has_state > 1) r.fail("bad trainer-state flag");
  if (has_state) {
    TrainerState st;
    st.step = r.u64();
    st.velocity.resize(count);
    for (auto& v : st.velocity) v = r.f64();
    ck.trainer = std::move(st);
  }
  r.expect_end();
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const EmbeddingModel& model,
                     const TrainerState* state) {
  io::write_file(path, encode_checkpoint(model, state));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace wvt
