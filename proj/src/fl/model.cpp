#include <rfl/fl/model.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rfl::fl {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<RowMat>;
using CMapR = Eigen::Map<const RowMat>;

RVec uniform_init(int n, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  RVec v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

void check_labels(const RMat& x, const std::vector<int>& y) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw std::invalid_argument("labels and samples differ in count");
}

class Logistic final : public Model {
 public:
  Logistic(int f, int c) : f_(f), c_(c) {}
  ModelKind kind() const override { return ModelKind::logistic; }
  int num_params() const override { return c_ * f_ + c_; }
  RVec initial_params(std::uint64_t) const override { return RVec::Zero(num_params()); }

  RMat logits(const RVec& q, const RMat& x) const override {
    CMapR w(q.data(), c_, f_);
    RMat z = x * w.transpose();
    z.rowwise() += q.segment(c_ * f_, c_).transpose();
    return z;
  }

  double loss_grad(const RVec& q, const RMat& x, const std::vector<int>& y, RVec* grad) const override {
    check_labels(x, y);
    RMat g;
    const double loss = softmax_cross_entropy(logits(q, x), y, grad ? &g : nullptr);
    if (grad) {
      grad->resize(num_params());
      MapR(grad->data(), c_, f_) = g.transpose() * x;
      grad->segment(c_ * f_, c_) = g.colwise().sum().transpose();
    }
    return loss;
  }

 private:
  int f_;
  int c_;
};

class SmallMlp final : public Model {
 public:
  SmallMlp(int f, int h, int c) : f_(f), h_(h), c_(c) {}
  ModelKind kind() const override { return ModelKind::small_mlp; }
  int num_params() const override { return h_ * f_ + h_ + c_ * h_ + c_; }

  RVec initial_params(std::uint64_t seed) const override {
    Rng rng(seed);
    RVec q = RVec::Zero(num_params());
    q.head(h_ * f_) = uniform_init(h_ * f_, std::sqrt(6.0 / f_), rng);
    q.segment(h_ * f_ + h_, c_ * h_) = uniform_init(c_ * h_, std::sqrt(6.0 / h_), rng);
    return q;
  }

  RMat logits(const RVec& q, const RMat& x) const override {
    RMat a;
    return forward(q, x, a);
  }

  double loss_grad(const RVec& q, const RMat& x, const std::vector<int>& y, RVec* grad) const override {
    check_labels(x, y);
    RMat a;
    const RMat z = forward(q, x, a);
    RMat g;
    const double loss = softmax_cross_entropy(z, y, grad ? &g : nullptr);
    if (grad) {
      grad->resize(num_params());
      const int o2 = h_ * f_ + h_;
      CMapR w2(q.data() + o2, c_, h_);
      MapR(grad->data() + o2, c_, h_) = g.transpose() * a;
      grad->segment(o2 + c_ * h_, c_) = g.colwise().sum().transpose();
      RMat da = g * w2;
      da = da.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
      MapR(grad->data(), h_, f_) = da.transpose() * x;
      grad->segment(h_ * f_, h_) = da.colwise().sum().transpose();
    }
    return loss;
  }

 private:
  RMat forward(const RVec& q, const RMat& x, RMat& a) const {
    CMapR w1(q.data(), h_, f_);
    a = x * w1.transpose();
    a.rowwise() += q.segment(h_ * f_, h_).transpose();
    a = a.cwiseMax(0.0);
    const int o2 = h_ * f_ + h_;
    CMapR w2(q.data() + o2, c_, h_);
    RMat z = a * w2.transpose();
    z.rowwise() += q.segment(o2 + c_ * h_, c_).transpose();
    return z;
  }

  int f_;
  int h_;
  int c_;
};

// conv5x5(32) -> relu -> pool2 -> conv5x5(64) -> relu -> pool2 -> fc(512) -> relu -> fc(classes)
// Convolutions use zero padding 2. Feature maps are stored as (pixels x channels).
class Cnn6 final : public Model {
 public:
  Cnn6(int side, int c) : s_(side), c_(c) {
    if (side < 4 || side % 4 != 0) throw ConfigError("cnn6 needs square images with side divisible by 4");
    const int flat = 64 * (s_ / 4) * (s_ / 4);
    o_k1_ = 0;
    o_b1_ = o_k1_ + 32 * 25;
    o_k2_ = o_b1_ + 32;
    o_b2_ = o_k2_ + 64 * 800;
    o_w3_ = o_b2_ + 64;
    o_b3_ = o_w3_ + 512 * flat;
    o_w4_ = o_b3_ + 512;
    o_b4_ = o_w4_ + c_ * 512;
    n_ = o_b4_ + c_;
  }
  ModelKind kind() const override { return ModelKind::cnn6; }
  int num_params() const override { return n_; }

  RVec initial_params(std::uint64_t seed) const override {
    Rng rng(seed);
    RVec q = RVec::Zero(n_);
    const int flat = flat_size();
    q.segment(o_k1_, 32 * 25) = uniform_init(32 * 25, std::sqrt(6.0 / 25), rng);
    q.segment(o_k2_, 64 * 800) = uniform_init(64 * 800, std::sqrt(6.0 / 800), rng);
    q.segment(o_w3_, 512 * flat) = uniform_init(512 * flat, std::sqrt(6.0 / flat), rng);
    q.segment(o_w4_, c_ * 512) = uniform_init(c_ * 512, std::sqrt(6.0 / 512), rng);
    return q;
  }

  RMat logits(const RVec& q, const RMat& x) const override {
    RMat z(x.rows(), c_);
    Cache cache;
    for (Eigen::Index i = 0; i < x.rows(); ++i) z.row(i) = forward(q, x.row(i).transpose(), cache).transpose();
    return z;
  }

  double loss_grad(const RVec& q, const RMat& x, const std::vector<int>& y, RVec* grad) const override {
    check_labels(x, y);
    if (grad) *grad = RVec::Zero(n_);
    const auto b = static_cast<double>(x.rows());
    double loss = 0.0;
    Cache cache;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const RVec z = forward(q, x.row(i).transpose(), cache);
      RMat g;
      loss += softmax_cross_entropy(z.transpose(), {y[static_cast<std::size_t>(i)]}, grad ? &g : nullptr);
      if (grad) backward(q, cache, g.row(0).transpose() / b, *grad);
    }
    return loss / b;
  }

 private:
  struct Cache {
    RMat p1;              // im2col of the input, (s*s) x 25
    RMat a1;              // relu(conv1), (s*s) x 32
    RMat m1;              // pooled, (s/2)^2 x 32
    std::vector<int> i1;  // argmax per pooled entry
    RMat p2;              // (s/2)^2 x 800
    RMat a2;              // (s/2)^2 x 64
    RVec flat;            // pooled conv2, channel-major
    std::vector<int> i2;
    RVec h;               // relu(fc1)
  };

  int flat_size() const { return 64 * (s_ / 4) * (s_ / 4); }

  // patches of a (side x side x ch) map stored as (pixels x ch); column index ch*25 + ky*5 + kx
  static RMat im2col(const RMat& in, int side) {
    const auto ch = static_cast<int>(in.cols());
    RMat p = RMat::Zero(side * side, ch * 25);
    for (int yy = 0; yy < side; ++yy)
      for (int xx = 0; xx < side; ++xx)
        for (int ky = 0; ky < 5; ++ky) {
          const int sy = yy + ky - 2;
          if (sy < 0 || sy >= side) continue;
          for (int kx = 0; kx < 5; ++kx) {
            const int sx = xx + kx - 2;
            if (sx < 0 || sx >= side) continue;
            for (int c = 0; c < ch; ++c) p(yy * side + xx, c * 25 + ky * 5 + kx) = in(sy * side + sx, c);
          }
        }
    return p;
  }

  static RMat col2im(const RMat& dp, int side, int ch) {
    RMat out = RMat::Zero(side * side, ch);
    for (int yy = 0; yy < side; ++yy)
      for (int xx = 0; xx < side; ++xx)
        for (int ky = 0; ky < 5; ++ky) {
          const int sy = yy + ky - 2;
          if (sy < 0 || sy >= side) continue;
          for (int kx = 0; kx < 5; ++kx) {
            const int sx = xx + kx - 2;
            if (sx < 0 || sx >= side) continue;
            for (int c = 0; c < ch; ++c) out(sy * side + sx, c) += dp(yy * side + xx, c * 25 + ky * 5 + kx);
          }
        }
    return out;
  }

  static RMat pool(const RMat& in, int side, std::vector<int>& arg) {
    const int h = side / 2;
    RMat out(h * h, in.cols());
    arg.assign(static_cast<std::size_t>(h * h * in.cols()), 0);
    for (Eigen::Index c = 0; c < in.cols(); ++c)
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < h; ++xx) {
          int best = (2 * yy) * side + 2 * xx;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int idx = (2 * yy + dy) * side + 2 * xx + dx;
              if (in(idx, c) > in(best, c)) best = idx;
            }
          out(yy * h + xx, c) = in(best, c);
          arg[static_cast<std::size_t>(c * h * h + yy * h + xx)] = best;
        }
    return out;
  }

  static RMat unpool(const RMat& d, int side, const std::vector<int>& arg) {
    const int h = side / 2;
    RMat out = RMat::Zero(side * side, d.cols());
    for (Eigen::Index c = 0; c < d.cols(); ++c)
      for (int p = 0; p < h * h; ++p) out(arg[static_cast<std::size_t>(c * h * h + p)], c) += d(p, c);
    return out;
  }

  RVec forward(const RVec& q, const RVec& x, Cache& k) const {
    const int s2 = s_ / 2;
    const int s4 = s_ / 4;
    k.p1 = im2col(Eigen::Map<const RMat>(x.data(), s_ * s_, 1), s_);
    CMapR k1(q.data() + o_k1_, 32, 25);
    k.a1 = k.p1 * k1.transpose();
    k.a1.rowwise() += q.segment(o_b1_, 32).transpose();
    k.a1 = k.a1.cwiseMax(0.0);
    k.m1 = pool(k.a1, s_, k.i1);
    k.p2 = im2col(k.m1, s2);
    CMapR k2(q.data() + o_k2_, 64, 800);
    k.a2 = k.p2 * k2.transpose();
    k.a2.rowwise() += q.segment(o_b2_, 64).transpose();
    k.a2 = k.a2.cwiseMax(0.0);
    const RMat m2 = pool(k.a2, s2, k.i2);
    k.flat = Eigen::Map<const RVec>(m2.data(), s4 * s4 * 64);  // column-major: channel blocks
    CMapR w3(q.data() + o_w3_, 512, flat_size());
    k.h = (w3 * k.flat + q.segment(o_b3_, 512)).cwiseMax(0.0);
    CMapR w4(q.data() + o_w4_, c_, 512);
    return w4 * k.h + q.segment(o_b4_, c_);
  }

  void backward(const RVec& q, const Cache& k, const RVec& dz, RVec& g) const {
    const int s2 = s_ / 2;
    const int s4 = s_ / 4;
    const int flat = flat_size();
    CMapR w4(q.data() + o_w4_, c_, 512);
    MapR(g.data() + o_w4_, c_, 512) += dz * k.h.transpose();
    g.segment(o_b4_, c_) += dz;
    const RVec dh = (w4.transpose() * dz).cwiseProduct((k.h.array() > 0.0).cast<double>().matrix());
    CMapR w3(q.data() + o_w3_, 512, flat);
    MapR(g.data() + o_w3_, 512, flat) += dh * k.flat.transpose();
    g.segment(o_b3_, 512) += dh;
    const RVec dflat = w3.transpose() * dh;
    const RMat dm2 = Eigen::Map<const RMat>(dflat.data(), s4 * s4, 64);
    RMat da2 = unpool(dm2, s2, k.i2).cwiseProduct((k.a2.array() > 0.0).cast<double>().matrix());
    MapR(g.data() + o_k2_, 64, 800) += da2.transpose() * k.p2;
    g.segment(o_b2_, 64) += da2.colwise().sum().transpose();
    CMapR k2(q.data() + o_k2_, 64, 800);
    const RMat dm1 = col2im(da2 * k2, s2, 32);
    RMat da1 = unpool(dm1, s_, k.i1).cwiseProduct((k.a1.array() > 0.0).cast<double>().matrix());
    MapR(g.data() + o_k1_, 32, 25) += da1.transpose() * k.p1;
    g.segment(o_b1_, 32) += da1.colwise().sum().transpose();
  }

  int s_;
  int c_;
  int o_k1_, o_b1_, o_k2_, o_b2_, o_w3_, o_b3_, o_w4_, o_b4_, n_;
};

}  // namespace

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "logistic") return ModelKind::logistic;
  if (s == "small_mlp") return ModelKind::small_mlp;
  if (s == "cnn6") return ModelKind::cnn6;
  throw ConfigError("unknown model '" + s + "'");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::logistic: return "logistic";
    case ModelKind::small_mlp: return "small_mlp";
    case ModelKind::cnn6: return "cnn6";
  }
  return "unknown";
}

std::unique_ptr<Model> make_model(ModelKind kind, int num_features, int num_classes, int hidden) {
  if (num_features < 1 || num_classes < 2) throw ConfigError("model needs features >= 1 and classes >= 2");
  switch (kind) {
    case ModelKind::logistic: return std::make_unique<Logistic>(num_features, num_classes);
    case ModelKind::small_mlp:
      if (hidden < 1) throw ConfigError("small_mlp needs hidden >= 1");
      return std::make_unique<SmallMlp>(num_features, hidden, num_classes);
    case ModelKind::cnn6: {
      const int side = static_cast<int>(std::lround(std::sqrt(double(num_features))));
      if (side * side != num_features) throw ConfigError("cnn6 needs square single-channel images");
      return std::make_unique<Cnn6>(side, num_classes);
    }
  }
  throw ConfigError("unknown model kind");
}

double softmax_cross_entropy(const RMat& logits, const std::vector<int>& y, RMat* dlogits) {
  const Eigen::Index b = logits.rows();
  if (static_cast<std::size_t>(b) != y.size()) throw std::invalid_argument("labels and logits differ in count");
  if (b == 0) {
    if (dlogits) *dlogits = RMat::Zero(0, logits.cols());
    return 0.0;
  }
  double loss = 0.0;
  if (dlogits) dlogits->resize(b, logits.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const RVec e = (logits.row(i).array() - mx).exp().matrix().transpose();
    const double sum = e.sum();
    const int label = y[static_cast<std::size_t>(i)];
    if (label < 0 || label >= logits.cols()) throw std::invalid_argument("label out of range");
    loss += std::log(sum) - (logits(i, label) - mx);
    if (dlogits) {
      dlogits->row(i) = (e / sum).transpose();
      (*dlogits)(i, label) -= 1.0;
    }
  }
  if (dlogits) *dlogits /= static_cast<double>(b);
  return loss / static_cast<double>(b);
}

EvalResult evaluate(const Model& m, const RVec& q, const Dataset& data) {
  EvalResult r;
  const int n = data.size();
  if (n == 0) return r;
  constexpr int kChunk = 1000;
  double loss = 0.0;
  int correct = 0;
  for (int start = 0; start < n; start += kChunk) {
    const int len = std::min(kChunk, n - start);
    const RMat z = m.logits(q, data.x.middleRows(start, len));
    const std::vector<int> y(data.y.begin() + start, data.y.begin() + start + len);
    loss += softmax_cross_entropy(z, y, nullptr) * len;
    for (int i = 0; i < len; ++i) {
      Eigen::Index arg = 0;
      z.row(i).maxCoeff(&arg);
      if (arg == y[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  r.loss = loss / n;
  r.accuracy = static_cast<double>(correct) / n;
  return r;
}

LocalUpdate local_update(const Model& m, const RVec& q_init, const Dataset& data, double lr, int epochs,
                         int batch_size, std::uint64_t seed, int max_steps) {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  LocalUpdate out;
  out.q = q_init;
  const int n = data.size();
  if (n == 0) {
    out.empty_data = true;
    return out;
  }
  Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  RVec grad;
  const int passes = max_steps > 0 ? std::numeric_limits<int>::max() : epochs;
  for (int e = 0; e < passes; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += batch_size) {
      const int len = std::min(batch_size, n - start);
      RMat xb(len, data.x.cols());
      std::vector<int> yb(static_cast<std::size_t>(len));
      for (int i = 0; i < len; ++i) {
        const int r = order[static_cast<std::size_t>(start + i)];
        xb.row(i) = data.x.row(r);
        yb[static_cast<std::size_t>(i)] = data.y[static_cast<std::size_t>(r)];
      }
      m.loss_grad(out.q, xb, yb, &grad);
      out.q -= lr * grad;
      ++out.steps;
      if (max_steps > 0 && out.steps >= max_steps) return out;
    }
  }
  return out;
}

}  // namespace rfl::fl
