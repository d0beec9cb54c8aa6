#include "glossalign/model.hpp"

#include <cmath>

#include "glossalign/kernels.hpp"
#include "glossalign/rng.hpp"

namespace glossalign {

void HeadConfig::validate() const {
  if (n_heads < 1) throw Error(Err::ConfigInvalid, "n_heads must be >= 1");
  if (n_proj_layers < 1) throw Error(Err::ConfigInvalid, "n_proj_layers must be >= 1");
  if (d_h == 0 || d_model == 0) throw Error(Err::ConfigInvalid, "zero embedding dim");
  if (d_h % n_heads != 0)
    throw Error(Err::ConfigInvalid, "d_h (" + std::to_string(d_h) + ") not divisible by n_heads (" +
                                        std::to_string(n_heads) + ")");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw Error(Err::ConfigInvalid, "dropout_rate must be in [0,1)");
}

std::vector<TensorSpec> tensor_layout(const HeadConfig& config) {
  config.validate();
  const std::size_t d_k = config.head_dim();
  std::vector<TensorSpec> layout;
  for (std::size_t h = 0; h < config.n_heads; ++h) {
    const std::string p = "attn.h" + std::to_string(h) + ".";
    layout.push_back({p + "wq", config.d_h, d_k});
    if (config.attention_bias) layout.push_back({p + "bq", 1, d_k});
    layout.push_back({p + "wk", config.d_h, d_k});
    if (config.attention_bias) layout.push_back({p + "bk", 1, d_k});
    layout.push_back({p + "wv", config.d_h, d_k});
    if (config.attention_bias) layout.push_back({p + "bv", 1, d_k});
  }
  if (config.output_projection) {
    layout.push_back({"attn.wo", config.d_h, config.d_h});
    layout.push_back({"attn.bo", 1, config.d_h});
  }
  for (std::size_t l = 0; l < config.n_proj_layers; ++l) {
    const bool last = l + 1 == config.n_proj_layers;
    const std::size_t out = last ? config.d_model : config.d_h;
    const std::string p = "proj." + std::to_string(l) + ".";
    layout.push_back({p + "w", config.d_h, out});
    layout.push_back({p + "b", 1, out});
  }
  return layout;
}

HeadGradients zero_gradients(const ContextHeadParams& params) {
  HeadGradients grads;
  grads.reserve(params.tensors.size());
  for (const auto& t : params.tensors) grads.emplace_back(t.rows(), t.cols());
  return grads;
}

ContextHeadParams init_params(const HeadConfig& config, std::uint64_t seed) {
  ContextHeadParams params;
  params.config = config;
  Rng rng(derive_seed(seed, 0x1017));
  for (const auto& spec : tensor_layout(config)) {
    Matrix t(spec.rows, spec.cols);
    if (spec.rows > 1) {  // weight matrix: Xavier-uniform; biases stay zero
      const double bound = std::sqrt(6.0 / static_cast<double>(spec.rows + spec.cols));
      for (auto& v : t.data()) v = bound * (2.0 * rng.next_double() - 1.0);
    }
    params.tensors.push_back(std::move(t));
  }
  return params;
}

Vec mean_pool_span(const Matrix& h, Span span) {
  if (span.start >= span.end || span.end > h.rows())
    throw Error(Err::SpanOutOfRange, "span [" + std::to_string(span.start) + "," +
                                         std::to_string(span.end) + ") on " +
                                         std::to_string(h.rows()) + " tokens");
  Vec q(h.cols(), 0.0);
  for (std::size_t i = span.start; i < span.end; ++i) {
    const double* ri = h.row(i);
    for (std::size_t j = 0; j < h.cols(); ++j) q[j] += ri[j];
  }
  const double inv = 1.0 / static_cast<double>(span.end - span.start);
  for (auto& x : q) x *= inv;
  return q;
}

namespace {

void add_bias(Vec& v, const Matrix& b) {
  for (std::size_t j = 0; j < v.size(); ++j) v[j] += b(0, j);
}

void add_bias_rows(Matrix& m, const Matrix& b) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* ri = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) ri[j] += b(0, j);
  }
}

void attention_forward(const Vec& q, const Matrix& h, const ContextHeadParams& params,
                       DropoutState dropout, ForwardCache& cache) {
  const HeadConfig& cfg = params.config;
  if (q.size() != cfg.d_h || h.cols() != cfg.d_h)
    throw Error(Err::DimMismatch, "attention input dims vs d_h");
  const std::size_t n_heads = cfg.n_heads, d_k = cfg.head_dim(), n = h.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));

  cache.qp.resize(n_heads);
  cache.k.resize(n_heads);
  cache.v.resize(n_heads);
  cache.scores.resize(n_heads);
  cache.weights.resize(n_heads);
  cache.concat.assign(cfg.d_h, 0.0);

  for (std::size_t head = 0; head < n_heads; ++head) {
    Vec& qp = cache.qp[head];
    qp = kernels::vec_mat(q, params.wq(head));
    Matrix& k = cache.k[head];
    k = kernels::matmul(h, params.wk(head));
    Matrix& v = cache.v[head];
    v = kernels::matmul(h, params.wv(head));
    if (cfg.attention_bias) {
      add_bias(qp, params.bq(head));
      add_bias_rows(k, params.bk(head));
      add_bias_rows(v, params.bv(head));
    }

    Vec& s = cache.scores[head];
    s = kernels::mat_vec(k, qp);
    for (auto& x : s) x *= scale;

    Vec& w = cache.weights[head];
    w.assign(n, 0.0);
    double mx = s[0];
    for (std::size_t t = 1; t < n; ++t) mx = std::max(mx, s[t]);
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      w[t] = std::exp(s[t] - mx);
      sum += w[t];
    }
    for (auto& x : w) x /= sum;

    double* out = cache.concat.data() + head * d_k;
    for (std::size_t t = 0; t < n; ++t) {
      const double* vt = v.row(t);
      for (std::size_t j = 0; j < d_k; ++j) out[j] += w[t] * vt[j];
    }
  }

  if (cfg.output_projection) {
    cache.attn = kernels::vec_mat(cache.concat, params.wo());
    add_bias(cache.attn, params.bo());
  } else {
    cache.attn = cache.concat;
  }

  if (dropout.training && cfg.dropout_rate > 0.0) {
    Rng rng(derive_seed(dropout.seed, 0xd209));
    cache.dropout_scale.assign(cfg.d_h, 0.0);
    const double keep = 1.0 - cfg.dropout_rate;
    for (std::size_t j = 0; j < cfg.d_h; ++j)
      if (rng.next_double() >= cfg.dropout_rate) cache.dropout_scale[j] = 1.0 / keep;
    for (std::size_t j = 0; j < cfg.d_h; ++j) cache.attn[j] *= cache.dropout_scale[j];
  } else {
    cache.dropout_scale.clear();
  }
}

void projection_forward(const Vec& x, const ContextHeadParams& params, ForwardCache& cache) {
  const HeadConfig& cfg = params.config;
  cache.proj_in.resize(cfg.n_proj_layers);
  cache.proj_z.resize(cfg.n_proj_layers);
  Vec cur = x;
  for (std::size_t l = 0; l < cfg.n_proj_layers; ++l) {
    cache.proj_in[l] = cur;
    Vec z = kernels::vec_mat(cur, params.proj_w(l));
    add_bias(z, params.proj_b(l));
    cache.proj_z[l] = z;
    if (l + 1 < cfg.n_proj_layers)
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    cur = std::move(z);
  }
  const double n = norm2(cur);
  if (n <= 1e-12) throw Error(Err::ZeroRow, "projected embedding has norm <= 1e-12");
  for (auto& v : cur) v /= n;
  cache.e = std::move(cur);
}

}  // namespace

Vec multi_head_attention(const Vec& q, const Matrix& h, const ContextHeadParams& params,
                         DropoutState dropout) {
  ForwardCache cache;
  attention_forward(q, h, params, dropout, cache);
  return cache.attn;
}

Vec project(const Vec& v, const ContextHeadParams& params) {
  if (v.size() != params.config.d_h) throw Error(Err::DimMismatch, "project input vs d_h");
  ForwardCache cache;
  projection_forward(v, params, cache);
  return cache.e;
}

Vec context_forward_cached(const Matrix& h_c, Span span, const ContextHeadParams& params,
                           DropoutState dropout, ForwardCache& cache) {
  cache.q = mean_pool_span(h_c, span);
  attention_forward(cache.q, h_c, params, dropout, cache);
  projection_forward(cache.attn, params, cache);
  return cache.e;
}

Vec context_forward(const Matrix& h_c, Span span, const ContextHeadParams& params,
                    DropoutState dropout) {
  ForwardCache cache;
  return context_forward_cached(h_c, span, params, dropout, cache);
}

void context_backward(const Matrix& h_c, Span span, const ContextHeadParams& params,
                      const ForwardCache& cache, const Vec& grad_e, HeadGradients& grads) {
  (void)span;  // H_C is frozen; no gradient flows into the tokens
  const HeadConfig& cfg = params.config;
  const std::size_t n_heads = cfg.n_heads, d_k = cfg.head_dim(), n = h_c.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
  const std::size_t stride = params.per_head_stride();

  // normalization: e = z/|z|, dz = (de - e (e·de)) / |z|
  const Vec& z_last = cache.proj_z.back();
  const double zn = norm2(z_last);
  const double ed = dot(cache.e, grad_e);
  Vec dz(z_last.size());
  for (std::size_t j = 0; j < dz.size(); ++j) dz[j] = (grad_e[j] - cache.e[j] * ed) / zn;

  // projection stack, last layer first
  for (std::size_t l = cfg.n_proj_layers; l-- > 0;) {
    if (l + 1 < cfg.n_proj_layers) {  // undo the ReLU applied after layer l
      const Vec& z = cache.proj_z[l];
      for (std::size_t j = 0; j < dz.size(); ++j)
        if (z[j] <= 0.0) dz[j] = 0.0;
    }
    Matrix& dw = grads[params.proj_base() + 2 * l];
    Matrix& db = grads[params.proj_base() + 2 * l + 1];
    kernels::outer_add(dw, cache.proj_in[l], dz);
    for (std::size_t j = 0; j < dz.size(); ++j) db(0, j) += dz[j];
    dz = kernels::mat_vec(params.proj_w(l), dz);  // W·dzᵀ == dz·Wᵀ for vectors
  }

  // dropout
  Vec dattn = std::move(dz);
  if (!cache.dropout_scale.empty())
    for (std::size_t j = 0; j < dattn.size(); ++j) dattn[j] *= cache.dropout_scale[j];

  // output projection
  Vec dconcat;
  if (cfg.output_projection) {
    Matrix& dwo = grads[params.wo_index()];
    Matrix& dbo = grads[params.wo_index() + 1];
    kernels::outer_add(dwo, cache.concat, dattn);
    for (std::size_t j = 0; j < dattn.size(); ++j) dbo(0, j) += dattn[j];
    dconcat = kernels::mat_vec(params.wo(), dattn);
  } else {
    dconcat = std::move(dattn);
  }

  Vec dqp(d_k), ds(n), dw_scores(n);
  Matrix dk(n, d_k), dv(n, d_k);
  for (std::size_t head = 0; head < n_heads; ++head) {
    const double* dhead = dconcat.data() + head * d_k;
    const Matrix& v = cache.v[head];
    const Vec& w = cache.weights[head];

    // head output o = Σ_t w_t v_t
    dk.fill(0.0);
    dv.fill(0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double* vt = v.row(t);
      double* dvt = dv.row(t);
      double s = 0.0;
      for (std::size_t j = 0; j < d_k; ++j) {
        dvt[j] = w[t] * dhead[j];
        s += dhead[j] * vt[j];
      }
      dw_scores[t] = s;
    }

    // softmax over the single query's scores
    double wsum = 0.0;
    for (std::size_t t = 0; t < n; ++t) wsum += dw_scores[t] * w[t];
    for (std::size_t t = 0; t < n; ++t) ds[t] = w[t] * (dw_scores[t] - wsum) * scale;

    // scores_t = scale * qp·k_t
    const Matrix& k = cache.k[head];
    std::fill(dqp.begin(), dqp.end(), 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double* kt = k.row(t);
      double* dkt = dk.row(t);
      for (std::size_t j = 0; j < d_k; ++j) {
        dqp[j] += ds[t] * kt[j];
        dkt[j] = ds[t] * cache.qp[head][j];
      }
    }

    Matrix& dwq = grads[head * stride + 0];
    kernels::outer_add(dwq, cache.q, dqp);
    Matrix& dwk = grads[head * stride + (cfg.attention_bias ? 2 : 1)];
    Matrix& dwv = grads[head * stride + (cfg.attention_bias ? 4 : 2)];
    // dWk += H_Cᵀ·dK, dWv += H_Cᵀ·dV
    for (std::size_t t = 0; t < n; ++t) {
      const double* ht = h_c.row(t);
      const double* dkt = dk.row(t);
      const double* dvt = dv.row(t);
      for (std::size_t r = 0; r < cfg.d_h; ++r) {
        double* dwk_r = dwk.row(r);
        double* dwv_r = dwv.row(r);
        const double hv = ht[r];
        for (std::size_t j = 0; j < d_k; ++j) {
          dwk_r[j] += hv * dkt[j];
          dwv_r[j] += hv * dvt[j];
        }
      }
    }
    if (cfg.attention_bias) {
      Matrix& dbq = grads[head * stride + 1];
      Matrix& dbk = grads[head * stride + 3];
      Matrix& dbv = grads[head * stride + 5];
      for (std::size_t j = 0; j < d_k; ++j) dbq(0, j) += dqp[j];
      for (std::size_t t = 0; t < n; ++t) {
        const double* dkt = dk.row(t);
        const double* dvt = dv.row(t);
        for (std::size_t j = 0; j < d_k; ++j) {
          dbk(0, j) += dkt[j];
          dbv(0, j) += dvt[j];
        }
      }
    }
  }
}

}  // namespace glossalign
