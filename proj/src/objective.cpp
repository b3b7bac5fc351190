#include "wvt/objective.hpp"

#include <cmath>

namespace wvt {

namespace {

void check_pair(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw DataError("cosine distance width mismatch: " + std::to_string(u.size()) + " vs " +
                    std::to_string(v.size()));
}

struct Dots {
  double uv = 0.0, uu = 0.0, vv = 0.0;
};

Dots dots(std::span<const double> u, std::span<const double> v) {
  Dots d;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(v[i]))
      throw DataError("non-finite input to cosine distance");
    d.uv += u[i] * v[i];
    d.uu += u[i] * u[i];
    d.vv += v[i] * v[i];
  }
  return d;
}

}  // namespace

void LossConfig::validate() const {
  if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
  if (negatives < 1) throw ConfigError("negatives per positive must be >= 1");
  if (sources.empty()) throw ConfigError("at least one metadata source must be enabled");
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  check_pair(u, v);
  const Dots d = dots(u, v);
  if (d.uu == 0.0 || d.vv == 0.0) return 1.0;
  return 1.0 - d.uv / (std::sqrt(d.uu) * std::sqrt(d.vv));
}

double cosine_distance_grad(std::span<const double> u, std::span<const double> v,
                            std::span<double> grad_u) {
  check_pair(u, v);
  if (grad_u.size() != u.size()) throw DataError("gradient buffer width mismatch");
  const Dots d = dots(u, v);
  if (d.uu == 0.0 || d.vv == 0.0) {
    std::fill(grad_u.begin(), grad_u.end(), 0.0);
    return 1.0;
  }
  const double nu = std::sqrt(d.uu), nv = std::sqrt(d.vv);
  const double inv = 1.0 / (nu * nv);
  const double cos = d.uv * inv;
  // d/du [-(u.v)/(|u||v|)] = -(v/(|u||v|) - cos * u/|u|^2)
  const double u_coef = cos / d.uu;
  for (std::size_t i = 0; i < u.size(); ++i) grad_u[i] = -(v[i] * inv - u_coef * u[i]);
  return 1.0 - cos;
}

RankingLoss ranking_loss(std::span<const double> pred, std::span<const double> pos,
                         std::span<const std::span<const double>> negs, double margin) {
  if (negs.empty()) throw DataError("ranking loss needs at least one negative");
  const std::size_t n = pred.size();
  RankingLoss out;
  out.grad.assign(n, 0.0);
  Vec g_pos(n), g_neg(n);
  const double d_pos = cosine_distance_grad(pred, pos, g_pos);
  const double k = static_cast<double>(negs.size());
  double sum = 0.0;
  for (const auto& neg : negs) {
    const double d_neg = cosine_distance_grad(pred, neg, g_neg);
    const double hinge = margin + (d_pos - d_neg);
    if (hinge > 0.0) {
      sum += hinge;
      for (std::size_t i = 0; i < n; ++i) out.grad[i] += (g_pos[i] - g_neg[i]) / k;
    }
  }
  out.value = sum / k;
  return out;
}

LossOutput batch_loss(const EmbeddingModel& model, std::span<const Example> batch,
                      const NegativeAssignment& negatives, const LossConfig& config,
                      std::span<const Vec> masks) {
  config.validate();
  const std::size_t b = batch.size();
  if (b < 2) throw DataError("batch size must be >= 2");
  if (negatives.size() != b) throw DataError("negative assignment size != batch size");
  if (!masks.empty() && masks.size() != b) throw DataError("dropout mask count != batch size");

  const auto& cfg = model.config();
  const auto& layout = model.layout();
  const auto params = model.parameters();
  const double inv_b = 1.0 / static_cast<double>(b);

  LossOutput out;
  out.param_grad.assign(layout.size(), 0.0);
  out.video_grad.assign(b, Vec(cfg.video_width, 0.0));
  std::span<double> grad(out.param_grad);

  std::vector<std::span<const double>> neg_views;
  for (std::size_t i = 0; i < b; ++i) {
    const HeadTrace trace = trace_video(model, batch[i].features,
                                        masks.empty() ? std::span<const double>{} : masks[i]);
    const Vec& f_v = trace.f_v;
    Vec& g_fv = out.video_grad[i];

    for (Source s : config.sources) {
      const auto& negs = negatives[i][index_of(s)];
      if (negs.size() != config.negatives)
        throw DataError("example " + std::to_string(i) + " has " + std::to_string(negs.size()) +
                        " negatives for " + std::string(source_name(s)) + ", expected " +
                        std::to_string(config.negatives));
      neg_views.clear();
      for (std::size_t j : negs) {
        if (j >= b) throw DataError("negative index " + std::to_string(j) + " out of range");
        if (j == i) throw DataError("negative index equals anchor index " + std::to_string(i));
        neg_views.push_back(batch[j].text[index_of(s)]);
      }
      const auto pos = batch[i].text[index_of(s)];
      if (pos.size() != cfg.text_width) throw DataError("text embedding width mismatch");

      const Vec pred = predict_metadata(model, f_v, s);
      const RankingLoss rl = ranking_loss(pred, pos, neg_views, config.margin);
      out.per_source[index_of(s)] += rl.value * inv_b;

      const auto w = view(params, layout.source_weight(s));
      const auto gw = view(grad, layout.source_weight(s));
      auto gb = view(grad, layout.source_bias(s)).flat();
      for (std::size_t r = 0; r < w.rows; ++r) {
        const double g = rl.grad[r] * inv_b;
        if (g == 0.0) continue;
        gb[r] += g;
        for (std::size_t c = 0; c < w.cols; ++c) {
          gw(r, c) += g * f_v[c];
          g_fv[c] += g * w(r, c);
        }
      }
    }

    // Back through dropout and the head.
    Vec g_out = g_fv;
    if (!masks.empty())
      for (std::size_t c = 0; c < g_out.size(); ++c) g_out[c] *= masks[i][c];
    for (std::size_t l = layout.layer_count(); l-- > 0;) {
      if (l + 1 < layout.layer_count()) {
        for (std::size_t r = 0; r < g_out.size(); ++r)
          if (trace.pre[l][r] <= 0.0) g_out[r] = 0.0;
      }
      const auto w = view(params, layout.layer_weight(l));
      const auto gw = view(grad, layout.layer_weight(l));
      auto gb = view(grad, layout.layer_bias(l)).flat();
      const Vec& input = trace.out[l];
      Vec g_in(w.cols, 0.0);
      for (std::size_t r = 0; r < w.rows; ++r) {
        const double g = g_out[r];
        if (g == 0.0) continue;
        gb[r] += g;
        for (std::size_t c = 0; c < w.cols; ++c) {
          gw(r, c) += g * input[c];
          g_in[c] += g * w(r, c);
        }
      }
      g_out = std::move(g_in);
    }
  }

  for (Source s : config.sources) out.value += out.per_source[index_of(s)];
  return out;
}

LossOutput batch_loss(EmbeddingModel& model, std::span<const Example> batch,
                      const NegativeAssignment& negatives, const LossConfig& config, Mode mode) {
  if (mode == Mode::Eval) return batch_loss(static_cast<const EmbeddingModel&>(model), batch, negatives, config, {});
  std::vector<Vec> masks;
  masks.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    masks.push_back(draw_dropout_mask(model.rng(), model.config().video_width, model.config().dropout_rate));
  return batch_loss(static_cast<const EmbeddingModel&>(model), batch, negatives, config, masks);
}

}  // namespace wvt
