#include "fmse/backbone.hpp"

#include <cmath>
#include <map>

namespace fmse {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void Backbone::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw InvalidInput("parameter vector has " + std::to_string(values.size()) +
                       " entries, backbone expects " + std::to_string(params_.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

std::vector<double> TimeEmbedding::encode(double t) const {
  if (dim < 2 || dim % 2 != 0) throw ConfigError("time embedding dim must be even and >= 2");
  const int half = dim / 2;
  std::vector<double> e(dim);
  for (int k = 0; k < half; ++k) {
    const double freq = half == 1 ? 1.0 : std::pow(1000.0, static_cast<double>(k) / (half - 1));
    e[k] = std::sin(freq * t);
    e[half + k] = std::cos(freq * t);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Reference network

namespace {

/// Feature map: pixels x channels, pixel index = freq + height * frame.
struct Feature {
  MatrixXd data;
  Index h = 0;
  Index w = 0;
};

struct ConvSpec {
  Index cin = 0;
  Index cout = 0;
  int k = 3;
  int stride = 1;
  std::size_t weight = 0;  // K x cout, column-major
  std::size_t bias = 0;    // cout
};

Index conv_out_dim(Index n, const ConvSpec& c) { return (n + 2 * (c.k / 2) - c.k) / c.stride + 1; }

MatrixXd im2col(const Feature& in, const ConvSpec& c, Index oh, Index ow) {
  const int pad = c.k / 2;
  MatrixXd cols(oh * ow, c.cin * c.k * c.k);
  for (Index ci = 0; ci < c.cin; ++ci) {
    for (int kh = 0; kh < c.k; ++kh) {
      for (int kw = 0; kw < c.k; ++kw) {
        double* dst = cols.col(ci * c.k * c.k + kh * c.k + kw).data();
        const double* src = in.data.col(ci).data();
        for (Index oj = 0; oj < ow; ++oj) {
          const Index ij = oj * c.stride + kw - pad;
          double* d = dst + oh * oj;
          if (ij < 0 || ij >= in.w) {
            std::fill(d, d + oh, 0.0);
            continue;
          }
          for (Index oi = 0; oi < oh; ++oi) {
            const Index ii = oi * c.stride + kh - pad;
            d[oi] = (ii < 0 || ii >= in.h) ? 0.0 : src[ii + in.h * ij];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const MatrixXd& dcols, const ConvSpec& c, Index oh, Index ow, Feature& din) {
  const int pad = c.k / 2;
  for (Index ci = 0; ci < c.cin; ++ci) {
    double* dst = din.data.col(ci).data();
    for (int kh = 0; kh < c.k; ++kh) {
      for (int kw = 0; kw < c.k; ++kw) {
        const double* src = dcols.col(ci * c.k * c.k + kh * c.k + kw).data();
        for (Index oj = 0; oj < ow; ++oj) {
          const Index ij = oj * c.stride + kw - pad;
          if (ij < 0 || ij >= din.w) continue;
          for (Index oi = 0; oi < oh; ++oi) {
            const Index ii = oi * c.stride + kh - pad;
            if (ii >= 0 && ii < din.h) dst[ii + din.h * ij] += src[oi + oh * oj];
          }
        }
      }
    }
  }
}

Feature conv_forward(const Feature& in, const ConvSpec& c, const std::vector<double>& p) {
  const Index oh = conv_out_dim(in.h, c);
  const Index ow = conv_out_dim(in.w, c);
  Eigen::Map<const MatrixXd> wt(p.data() + c.weight, c.cin * c.k * c.k, c.cout);
  Eigen::Map<const VectorXd> b(p.data() + c.bias, c.cout);
  Feature out;
  out.h = oh;
  out.w = ow;
  out.data.noalias() = im2col(in, c, oh, ow) * wt;
  out.data.rowwise() += b.transpose();
  return out;
}

/// Accumulates parameter gradients; adds the input gradient to `din` when
/// non-null.
void conv_backward(const Feature& in, const ConvSpec& c, const MatrixXd& dout,
                   const std::vector<double>& p, std::span<double> g, Feature* din) {
  const Index oh = conv_out_dim(in.h, c);
  const Index ow = conv_out_dim(in.w, c);
  const MatrixXd cols = im2col(in, c, oh, ow);
  Eigen::Map<MatrixXd> gw(g.data() + c.weight, c.cin * c.k * c.k, c.cout);
  Eigen::Map<VectorXd> gb(g.data() + c.bias, c.cout);
  gw.noalias() += cols.transpose() * dout;
  gb += dout.colwise().sum().transpose();
  if (din != nullptr) {
    Eigen::Map<const MatrixXd> wt(p.data() + c.weight, c.cin * c.k * c.k, c.cout);
    const MatrixXd dcols = dout * wt.transpose();
    col2im_add(dcols, c, oh, ow, *din);
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd silu(const MatrixXd& z) {
  return z.unaryExpr([](double v) { return v * sigmoid(v); });
}

MatrixXd silu_grad(const MatrixXd& z, const MatrixXd& upstream) {
  return z.binaryExpr(upstream, [](double v, double g) {
    const double s = sigmoid(v);
    return g * s * (1.0 + v * (1.0 - s));
  });
}

Feature upsample(const Feature& in, Index h, Index w) {
  Feature out;
  out.h = h;
  out.w = w;
  out.data.resize(h * w, in.data.cols());
  for (Index c = 0; c < in.data.cols(); ++c) {
    for (Index j = 0; j < w; ++j) {
      for (Index i = 0; i < h; ++i) out.data(i + h * j, c) = in.data(i / 2 + in.h * (j / 2), c);
    }
  }
  return out;
}

Feature upsample_vjp(const MatrixXd& grad, Index h, Index w, Index src_h, Index src_w) {
  Feature out;
  out.h = src_h;
  out.w = src_w;
  out.data = MatrixXd::Zero(src_h * src_w, grad.cols());
  for (Index c = 0; c < grad.cols(); ++c) {
    for (Index j = 0; j < w; ++j) {
      for (Index i = 0; i < h; ++i) out.data(i / 2 + src_h * (j / 2), c) += grad(i + h * j, c);
    }
  }
  return out;
}

struct StageBias {
  std::size_t weight = 0;  // channels x embedding, column-major
  std::size_t bias = 0;
};

}  // namespace

struct ReferenceNet::Layout {
  Index channels = 0;
  int depth = 0;
  Index emb = 0;
  ConvSpec conv_in, conv_mid, conv_out, skip;
  std::vector<ConvSpec> down, up;  // up[k-1] is used on the way back to level k-1
  std::size_t time_weight = 0;     // emb x emb
  std::size_t time_bias = 0;
  std::size_t skip_gate = 0;       // (4 * 2) x emb, time-dependent part of the skip weights
  std::vector<StageBias> stage;    // in, down[0..d), mid, up[d-1..0] in application order
  std::size_t total = 0;
};

namespace {

struct RefCache final : BackboneCache {
  Feature in0;
  std::vector<double> emb;
  VectorXd time_pre;
  VectorXd hidden;
  std::vector<MatrixXd> pre;       // stage pre-activations in application order
  std::vector<Feature> enc;        // enc[0..depth]
  std::vector<Feature> up_inputs;  // in application order (level depth-1 first)
  Feature mid_out;
  Feature last;
  Index height = 0;
  Index width = 0;
};

}  // namespace

ReferenceNet::ReferenceNet(const Options& options) : options_(options) {
  if (options.channels < 4) throw ConfigError("reference net needs channels >= 4");
  if (options.depth < 1) throw ConfigError("reference net needs depth >= 1");
  if (options.embedding_dim < 2 || options.embedding_dim % 2 != 0) {
    throw ConfigError("embedding_dim must be even and >= 2");
  }
  auto layout = std::make_shared<Layout>();
  layout->channels = options.channels;
  layout->depth = options.depth;
  layout->emb = options.embedding_dim;
  std::size_t next = 0;
  auto conv = [&](Index cin, Index cout, int k, int stride) {
    ConvSpec c{cin, cout, k, stride, next, 0};
    next += static_cast<std::size_t>(cin * k * k * cout);
    c.bias = next;
    next += static_cast<std::size_t>(cout);
    return c;
  };
  const Index ch = options.channels;
  layout->conv_in = conv(4, ch, 3, 1);
  for (int k = 0; k < options.depth; ++k) layout->down.push_back(conv(ch, ch, 3, 2));
  layout->conv_mid = conv(ch, ch, 3, 1);
  for (int k = 0; k < options.depth; ++k) layout->up.push_back(conv(ch, ch, 3, 1));
  layout->conv_out = conv(ch, 2, 3, 1);
  layout->skip = conv(4, 2, 1, 1);
  layout->time_weight = next;
  next += static_cast<std::size_t>(layout->emb * layout->emb);
  layout->time_bias = next;
  next += static_cast<std::size_t>(layout->emb);
  layout->skip_gate = next;
  next += static_cast<std::size_t>(8 * layout->emb);
  for (int s = 0; s < 2 * options.depth + 2; ++s) {
    StageBias sb{next, 0};
    next += static_cast<std::size_t>(ch * layout->emb);
    sb.bias = next;
    next += static_cast<std::size_t>(ch);
    layout->stage.push_back(sb);
  }
  layout->total = next;

  params_.assign(next, 0.0);
  Rng rng(options.seed);
  auto init = [&](std::size_t off, std::size_t count, double stddev) {
    for (std::size_t i = 0; i < count; ++i) params_[off + i] = stddev * rng.normal();
  };
  auto init_conv = [&](const ConvSpec& c, double gain) {
    const Index fan_in = c.cin * c.k * c.k;
    init(c.weight, static_cast<std::size_t>(fan_in * c.cout), gain / std::sqrt(double(fan_in)));
  };
  init_conv(layout->conv_in, 1.0);
  for (const auto& c : layout->down) init_conv(c, 1.0);
  init_conv(layout->conv_mid, 1.0);
  for (const auto& c : layout->up) init_conv(c, 1.0);
  init_conv(layout->conv_out, 0.1);
  init_conv(layout->skip, 0.1);
  const double emb_std = 1.0 / std::sqrt(double(layout->emb));
  init(layout->time_weight, static_cast<std::size_t>(layout->emb * layout->emb), emb_std);
  for (const auto& sb : layout->stage) {
    init(sb.weight, static_cast<std::size_t>(ch * layout->emb), 0.1 * emb_std);
  }
  layout_ = std::move(layout);
}

CMatrix ReferenceNet::forward(const CMatrix& x_in, const CMatrix& y_in, double t,
                              std::unique_ptr<BackboneCache>* cache) const {
  if (x_in.rows() != y_in.rows() || x_in.cols() != y_in.cols()) {
    throw InvalidInput("reference net: x_in and y_in shapes differ");
  }
  const Layout& L = *layout_;
  const std::vector<double>& p = params_;
  auto rc = std::make_unique<RefCache>();
  const Index h = x_in.rows();
  const Index w = x_in.cols();
  rc->height = h;
  rc->width = w;

  rc->in0.h = h;
  rc->in0.w = w;
  rc->in0.data.resize(h * w, 4);
  for (Index j = 0; j < w; ++j) {
    for (Index i = 0; i < h; ++i) {
      const Index px = i + h * j;
      rc->in0.data(px, 0) = x_in(i, j).real();
      rc->in0.data(px, 1) = x_in(i, j).imag();
      rc->in0.data(px, 2) = y_in(i, j).real();
      rc->in0.data(px, 3) = y_in(i, j).imag();
    }
  }

  rc->emb = TimeEmbedding{static_cast<int>(L.emb)}.encode(t);
  Eigen::Map<const VectorXd> e(rc->emb.data(), L.emb);
  Eigen::Map<const MatrixXd> tw(p.data() + L.time_weight, L.emb, L.emb);
  Eigen::Map<const VectorXd> tb(p.data() + L.time_bias, L.emb);
  rc->time_pre = tw * e + tb;
  rc->hidden = silu(rc->time_pre);

  std::size_t stage = 0;
  auto apply_stage = [&](const Feature& in, const ConvSpec& c) {
    Feature z = conv_forward(in, c, p);
    const StageBias& sb = L.stage[stage++];
    Eigen::Map<const MatrixXd> sw(p.data() + sb.weight, L.channels, L.emb);
    Eigen::Map<const VectorXd> sbias(p.data() + sb.bias, L.channels);
    const VectorXd bias = sw * rc->hidden + sbias;
    z.data.rowwise() += bias.transpose();
    rc->pre.push_back(z.data);
    z.data = silu(z.data);
    return z;
  };

  rc->enc.push_back(apply_stage(rc->in0, L.conv_in));
  for (int k = 0; k < L.depth; ++k) rc->enc.push_back(apply_stage(rc->enc.back(), L.down[k]));
  Feature cur = apply_stage(rc->enc.back(), L.conv_mid);
  for (int k = L.depth - 1; k >= 0; --k) {
    const Feature& skip = rc->enc[k];
    Feature u = upsample(cur, skip.h, skip.w);
    u.data += skip.data;
    rc->up_inputs.push_back(u);
    cur = apply_stage(u, L.up[k]);
  }
  rc->last = cur;

  Feature out = conv_forward(cur, L.conv_out, p);
  {
    Eigen::Map<const MatrixXd> gate(p.data() + L.skip_gate, 8, L.emb);
    const VectorXd dyn = gate * rc->hidden;
    const MatrixXd weight =
        Eigen::Map<const MatrixXd>(p.data() + L.skip.weight, 4, 2) + Eigen::Map<const MatrixXd>(dyn.data(), 4, 2);
    Eigen::Map<const VectorXd> bias(p.data() + L.skip.bias, 2);
    out.data.noalias() += rc->in0.data * weight;
    out.data.rowwise() += bias.transpose();
  }

  CMatrix result(h, w);
  for (Index j = 0; j < w; ++j) {
    for (Index i = 0; i < h; ++i) {
      const Index px = i + h * j;
      result(i, j) = {out.data(px, 0), out.data(px, 1)};
    }
  }
  if (cache != nullptr) *cache = std::move(rc);
  return result;
}

void ReferenceNet::backward(const BackboneCache& base, const CMatrix& grad_out,
                            std::span<double> g) const {
  const auto* rc = dynamic_cast<const RefCache*>(&base);
  if (rc == nullptr) throw InvalidInput("reference net: foreign cache");
  if (g.size() != params_.size()) throw InvalidInput("reference net: gradient size mismatch");
  const Layout& L = *layout_;
  const std::vector<double>& p = params_;
  const Index h = rc->height;
  const Index w = rc->width;
  if (grad_out.rows() != h || grad_out.cols() != w) {
    throw InvalidInput("reference net: gradient shape mismatch");
  }

  MatrixXd dout(h * w, 2);
  for (Index j = 0; j < w; ++j) {
    for (Index i = 0; i < h; ++i) {
      dout(i + h * j, 0) = grad_out(i, j).real();
      dout(i + h * j, 1) = grad_out(i, j).imag();
    }
  }
  // Skip path: effective weights W0 + reshape(gate * hidden).
  const MatrixXd dskip = rc->in0.data.transpose() * dout;
  Eigen::Map<const VectorXd> dskip_vec(dskip.data(), 8);
  Eigen::Map<MatrixXd>(g.data() + L.skip.weight, 4, 2) += dskip;
  Eigen::Map<VectorXd>(g.data() + L.skip.bias, 2) += dout.colwise().sum().transpose();
  Eigen::Map<const MatrixXd> gate(p.data() + L.skip_gate, 8, L.emb);
  Eigen::Map<MatrixXd>(g.data() + L.skip_gate, 8, L.emb).noalias() +=
      dskip_vec * rc->hidden.transpose();

  std::vector<VectorXd> dstage(L.stage.size());
  auto stage_backward = [&](std::size_t s, const Feature& in, const ConvSpec& c,
                            const MatrixXd& dact, Feature* din) {
    const MatrixXd dz = silu_grad(rc->pre[s], dact);
    dstage[s] = dz.colwise().sum().transpose();
    conv_backward(in, c, dz, p, g, din);
  };
  auto zeros_like = [](const Feature& f) {
    Feature z;
    z.h = f.h;
    z.w = f.w;
    z.data = MatrixXd::Zero(f.data.rows(), f.data.cols());
    return z;
  };

  Feature dcur = zeros_like(rc->last);
  conv_backward(rc->last, L.conv_out, dout, p, g, &dcur);

  std::vector<Feature> denc;
  for (const auto& f : rc->enc) denc.push_back(zeros_like(f));

  // Decoder, in reverse application order.
  const std::size_t first_up_stage = static_cast<std::size_t>(L.depth) + 2;
  for (int k = 0; k < L.depth; ++k) {
    const std::size_t app = static_cast<std::size_t>(L.depth - 1 - k);  // application index
    const Feature& u = rc->up_inputs[app];
    Feature du = zeros_like(u);
    stage_backward(first_up_stage + app, u, L.up[k], dcur.data, &du);
    denc[k].data += du.data;
    // The upsampled tensor lived at the resolution of enc[k + 1].
    dcur = upsample_vjp(du.data, u.h, u.w, rc->enc[k + 1].h, rc->enc[k + 1].w);
  }

  // Bottleneck.
  {
    const std::size_t s = static_cast<std::size_t>(L.depth) + 1;
    stage_backward(s, rc->enc[L.depth], L.conv_mid, dcur.data, &denc[L.depth]);
  }
  // Encoder.
  for (int k = L.depth; k >= 1; --k) {
    stage_backward(static_cast<std::size_t>(k), rc->enc[k - 1], L.down[k - 1], denc[k].data,
                   &denc[k - 1]);
  }
  stage_backward(0, rc->in0, L.conv_in, denc[0].data, nullptr);

  // Time embedding MLP.
  Eigen::Map<const VectorXd> e(rc->emb.data(), L.emb);
  VectorXd dhidden = gate.transpose() * dskip_vec;
  for (std::size_t s = 0; s < L.stage.size(); ++s) {
    const StageBias& sb = L.stage[s];
    Eigen::Map<const MatrixXd> sw(p.data() + sb.weight, L.channels, L.emb);
    Eigen::Map<MatrixXd> gsw(g.data() + sb.weight, L.channels, L.emb);
    Eigen::Map<VectorXd> gsb(g.data() + sb.bias, L.channels);
    gsw.noalias() += dstage[s] * rc->hidden.transpose();
    gsb += dstage[s];
    dhidden.noalias() += sw.transpose() * dstage[s];
  }
  const VectorXd dpre = silu_grad(rc->time_pre, dhidden);
  Eigen::Map<MatrixXd> gtw(g.data() + L.time_weight, L.emb, L.emb);
  Eigen::Map<VectorXd> gtb(g.data() + L.time_bias, L.emb);
  gtw.noalias() += dpre * e.transpose();
  gtb += dpre;
}

nlohmann::json ReferenceNet::architecture() const {
  return {{"type", "reference"},
          {"channels", options_.channels},
          {"depth", options_.depth},
          {"embedding_dim", options_.embedding_dim},
          {"seed", options_.seed}};
}

std::unique_ptr<Backbone> ReferenceNet::clone() const {
  return std::make_unique<ReferenceNet>(*this);
}

std::unique_ptr<Backbone> reference_net(int channels, int depth) {
  ReferenceNet::Options o;
  o.channels = channels;
  o.depth = depth;
  return std::make_unique<ReferenceNet>(o);
}

// ---------------------------------------------------------------------------

namespace {
struct LinearCache final : BackboneCache {
  CMatrix x;
  CMatrix y;
};
}  // namespace

LinearBackbone::LinearBackbone(double w_x, double w_y) { params_ = {w_x, w_y}; }

CMatrix LinearBackbone::forward(const CMatrix& x_in, const CMatrix& y_in, double,
                                std::unique_ptr<BackboneCache>* cache) const {
  if (x_in.rows() != y_in.rows() || x_in.cols() != y_in.cols()) {
    throw InvalidInput("linear backbone: shape mismatch");
  }
  if (cache != nullptr) {
    auto c = std::make_unique<LinearCache>();
    c->x = x_in;
    c->y = y_in;
    *cache = std::move(c);
  }
  return params_[0] * x_in + params_[1] * y_in;
}

void LinearBackbone::backward(const BackboneCache& base, const CMatrix& grad_out,
                              std::span<double> g) const {
  const auto* c = dynamic_cast<const LinearCache*>(&base);
  if (c == nullptr) throw InvalidInput("linear backbone: foreign cache");
  // dL/dw = sum Re(conj(G) * d out / dw)
  g[0] += (grad_out.conjugate().cwiseProduct(c->x)).sum().real();
  g[1] += (grad_out.conjugate().cwiseProduct(c->y)).sum().real();
}

nlohmann::json LinearBackbone::architecture() const { return {{"type", "linear"}}; }

std::unique_ptr<Backbone> LinearBackbone::clone() const {
  return std::make_unique<LinearBackbone>(*this);
}

// ---------------------------------------------------------------------------

CMatrix FunctionBackbone::forward(const CMatrix& x_in, const CMatrix& y_in, double t,
                                  std::unique_ptr<BackboneCache>* cache) const {
  if (cache != nullptr) *cache = std::make_unique<BackboneCache>();
  CMatrix out = fn_(x_in, y_in, t);
  if (out.rows() != x_in.rows() || out.cols() != x_in.cols()) {
    throw InvalidInput("backbone output shape differs from its input");
  }
  return out;
}

void FunctionBackbone::backward(const BackboneCache&, const CMatrix&, std::span<double>) const {
  throw InvalidInput("function backbone is not differentiable");
}

nlohmann::json FunctionBackbone::architecture() const { return {{"type", "function"}}; }

std::unique_ptr<Backbone> FunctionBackbone::clone() const {
  return std::make_unique<FunctionBackbone>(*this);
}

namespace {
std::map<std::string, BackboneFactory>& registry() {
  static std::map<std::string, BackboneFactory> r;
  return r;
}
}  // namespace

void register_backbone(const std::string& type, BackboneFactory factory) {
  if (type == "reference" || type == "linear") {
    throw InvalidInput("backbone type '" + type + "' is built in");
  }
  registry()[type] = std::move(factory);
}

std::unique_ptr<Backbone> make_backbone(const nlohmann::json& arch) {
  const std::string type = arch.value("type", "");
  if (auto it = registry().find(type); it != registry().end()) return it->second(arch);
  if (type == "reference") {
    ReferenceNet::Options o;
    o.channels = arch.at("channels").get<int>();
    o.depth = arch.at("depth").get<int>();
    o.embedding_dim = arch.at("embedding_dim").get<int>();
    o.seed = arch.value("seed", std::uint64_t{0});
    return std::make_unique<ReferenceNet>(o);
  }
  if (type == "linear") return std::make_unique<LinearBackbone>();
  throw ConfigError("unknown backbone type '" + type + "'");
}

}  // namespace fmse
