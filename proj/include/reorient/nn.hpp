// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reorient/rng.hpp"

// Small in-repo network stack: linear/ELU/GRU/3D-convolution layers with
// explicit backward passes, an Adam optimizer, and a binary checkpoint
// container. Layers are templated on the scalar so the tests can run the
// same code in double precision against finite differences; runtime networks
// use float, matching the float32 checkpoint payload bit for bit.
namespace reorient::nn {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct ParamRef {
  std::string name;
  MatX<S>* value = nullptr;
  MatX<S>* grad = nullptr;
};

template <typename S>
void glorot_init(MatX<S>& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(m.rows() + m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = S(rng.uniform(-bound, bound));
  }
}

// ---------------------------------------------------------------------------
// Linear

template <typename S>
class LinearT {
 public:
  LinearT() = default;
  LinearT(int in, int out, Rng& rng, std::string name = "linear")
      : name_(std::move(name)) {
    weight_.resize(out, in);
    glorot_init(weight_, rng);
    bias_ = MatX<S>::Zero(out, 1);
    zero_grad();
  }

  void zero_init() { weight_.setZero(); bias_.setZero(); }

  // Columns are samples.
  MatX<S> forward(const MatX<S>& x) {
    input_ = x;
    return (weight_ * x).colwise() + VecX<S>(bias_.col(0));
  }

  MatX<S> backward(const MatX<S>& dy) {
    weight_grad_ += dy * input_.transpose();
    bias_grad_.col(0) += dy.rowwise().sum();
    return weight_.transpose() * dy;
  }

  void zero_grad() {
    weight_grad_ = MatX<S>::Zero(weight_.rows(), weight_.cols());
    bias_grad_ = MatX<S>::Zero(bias_.rows(), 1);
  }

  std::vector<ParamRef<S>> params() {
    return {{name_ + ".weight", &weight_, &weight_grad_},
            {name_ + ".bias", &bias_, &bias_grad_}};
  }

  int in_size() const { return int(weight_.cols()); }
  int out_size() const { return int(weight_.rows()); }
  MatX<S>& weight() { return weight_; }
  MatX<S>& bias() { return bias_; }

 private:
  std::string name_;
  MatX<S> weight_, bias_;
  MatX<S> weight_grad_, bias_grad_;
  MatX<S> input_;
};

// ---------------------------------------------------------------------------
// Activations (stateless apart from the cached forward activation)

template <typename S>
class EluT {
 public:
  MatX<S> forward(const MatX<S>& x) {
    output_ = x.unaryExpr([](S v) {
      return v > S(0) ? v : S(std::expm1(double(v)));
    });
    return output_;
  }
  MatX<S> backward(const MatX<S>& dy) const {
    // d/dx elu = 1 for x > 0, elu(x) + 1 otherwise.
    return dy.array() *
           output_.unaryExpr([](S v) { return v > S(0) ? S(1) : v + S(1); })
               .array();
  }

 private:
  MatX<S> output_;
};

template <typename S>
MatX<S> sigmoid(const MatX<S>& x) {
  return x.unaryExpr([](S v) { return S(1) / (S(1) + S(std::exp(-double(v)))); });
}

template <typename S>
class SoftplusT {
 public:
  MatX<S> forward(const MatX<S>& x) {
    input_ = x;
    return x.unaryExpr([](S v) {
      // Stable log(1 + e^x).
      const double d = double(v);
      return S(d > 30.0 ? d : std::log1p(std::exp(d)));
    });
  }
  MatX<S> backward(const MatX<S>& dy) const {
    return dy.array() * sigmoid(input_).array();
  }

 private:
  MatX<S> input_;
};

// ---------------------------------------------------------------------------
// GRU cell
//
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wn x + r .* (Un h) + bn)
//   h' = (1 - z) .* n + z .* h

template <typename S>
class GruCellT {
 public:
  GruCellT() = default;
  GruCellT(int input, int hidden, Rng& rng, std::string name = "gru")
      : name_(std::move(name)), input_size_(input), hidden_size_(hidden) {
    const auto make = [&](MatX<S>& m, int rows, int cols) {
      m.resize(rows, cols);
      glorot_init(m, rng);
    };
    make(wz_, hidden, input);
    make(uz_, hidden, hidden);
    make(wr_, hidden, input);
    make(ur_, hidden, hidden);
    make(wn_, hidden, input);
    make(un_, hidden, hidden);
    bz_ = MatX<S>::Zero(hidden, 1);
    br_ = MatX<S>::Zero(hidden, 1);
    bn_ = MatX<S>::Zero(hidden, 1);
    zero_grad();
  }

  int input_size() const { return input_size_; }
  int hidden_size() const { return hidden_size_; }

  struct Cache {
    MatX<S> x, h, z, r, n, uh;
  };

  // One time step; batch in columns. The cache allows backward through a
  // stored sequence in reverse order.
  MatX<S> forward(const MatX<S>& x, const MatX<S>& h, Cache* cache = nullptr) {
    const MatX<S> z = sigmoid<S>(((wz_ * x + uz_ * h).colwise() + VecX<S>(bz_.col(0))).eval());
    const MatX<S> r = sigmoid<S>(((wr_ * x + ur_ * h).colwise() + VecX<S>(br_.col(0))).eval());
    const MatX<S> uh = un_ * h;
    MatX<S> n = ((wn_ * x).array() + r.array() * uh.array()).matrix();
    n = (n.colwise() + VecX<S>(bn_.col(0)))
            .unaryExpr([](S v) { return S(std::tanh(double(v))); });
    const MatX<S> h_next =
        ((S(1) - z.array()) * n.array() + z.array() * h.array()).matrix();
    if (cache) *cache = Cache{x, h, z, r, n, uh};
    return h_next;
  }

  // Returns {dx, dh} for the incoming dh_next.
  std::pair<MatX<S>, MatX<S>> backward(const MatX<S>& dh_next,
                                       const Cache& c) {
    using A = Eigen::ArrayXX<S>;
    const A g = dh_next.array();
    const A dz = g * (c.h.array() - c.n.array());
    const A dn = g * (S(1) - c.z.array());
    A dh = g * c.z.array();

    const A dn_pre = dn * (S(1) - c.n.array().square());
    const A dr = dn_pre * c.uh.array();
    const A duh = dn_pre * c.r.array();

    const A dz_pre = dz * c.z.array() * (S(1) - c.z.array());
    const A dr_pre = dr * c.r.array() * (S(1) - c.r.array());

    wn_g_ += dn_pre.matrix() * c.x.transpose();
    un_g_ += duh.matrix() * c.h.transpose();
    bn_g_.col(0) += dn_pre.matrix().rowwise().sum();
    wz_g_ += dz_pre.matrix() * c.x.transpose();
    uz_g_ += dz_pre.matrix() * c.h.transpose();
    bz_g_.col(0) += dz_pre.matrix().rowwise().sum();
    wr_g_ += dr_pre.matrix() * c.x.transpose();
    ur_g_ += dr_pre.matrix() * c.h.transpose();
    br_g_.col(0) += dr_pre.matrix().rowwise().sum();

    MatX<S> dx = wn_.transpose() * dn_pre.matrix() +
                 wz_.transpose() * dz_pre.matrix() +
                 wr_.transpose() * dr_pre.matrix();
    dh += (un_.transpose() * duh.matrix()).array() +
          (uz_.transpose() * dz_pre.matrix()).array() +
          (ur_.transpose() * dr_pre.matrix()).array();
    return {dx, dh.matrix()};
  }

  void zero_grad() {
    const auto zero_like = [](MatX<S>& g, const MatX<S>& v) {
      g = MatX<S>::Zero(v.rows(), v.cols());
    };
    zero_like(wz_g_, wz_);
    zero_like(uz_g_, uz_);
    zero_like(bz_g_, bz_);
    zero_like(wr_g_, wr_);
    zero_like(ur_g_, ur_);
    zero_like(br_g_, br_);
    zero_like(wn_g_, wn_);
    zero_like(un_g_, un_);
    zero_like(bn_g_, bn_);
  }

  std::vector<ParamRef<S>> params() {
    return {{name_ + ".wz", &wz_, &wz_g_}, {name_ + ".uz", &uz_, &uz_g_},
            {name_ + ".bz", &bz_, &bz_g_}, {name_ + ".wr", &wr_, &wr_g_},
            {name_ + ".ur", &ur_, &ur_g_}, {name_ + ".br", &br_, &br_g_},
            {name_ + ".wn", &wn_, &wn_g_}, {name_ + ".un", &un_, &un_g_},
            {name_ + ".bn", &bn_, &bn_g_}};
  }

 private:
  std::string name_;
  int input_size_ = 0, hidden_size_ = 0;
  MatX<S> wz_, uz_, bz_, wr_, ur_, br_, wn_, un_, bn_;
  MatX<S> wz_g_, uz_g_, bz_g_, wr_g_, ur_g_, br_g_, wn_g_, un_g_, bn_g_;
};

// ---------------------------------------------------------------------------
// Dense 3D convolution (valid padding), via im2col.

struct Conv3dShape {
  int in_channels = 1;
  int in_dims[3] = {0, 0, 0};  // x, y, z
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;

  int out_dim(int axis) const {
    return (in_dims[axis] - kernel) / stride + 1;
  }
  int in_volume() const { return in_dims[0] * in_dims[1] * in_dims[2]; }
  int out_volume() const { return out_dim(0) * out_dim(1) * out_dim(2); }
  int in_size() const { return in_channels * in_volume(); }
  int out_size() const { return out_channels * out_volume(); }
  int patch_size() const { return in_channels * kernel * kernel * kernel; }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (in_dims[a] < kernel) {
        throw std::invalid_argument("Conv3dShape: input smaller than kernel");
      }
    }
    if (stride < 1 || kernel < 1) {
      throw std::invalid_argument("Conv3dShape: bad kernel or stride");
    }
  }
};

template <typename S>
class Conv3dT {
 public:
  Conv3dT() = default;
  Conv3dT(const Conv3dShape& shape, Rng& rng, std::string name = "conv")
      : name_(std::move(name)), shape_(shape) {
    shape_.validate();
    kernel_.resize(shape_.out_channels, shape_.patch_size());
    glorot_init(kernel_, rng);
    bias_ = MatX<S>::Zero(shape_.out_channels, 1);
    zero_grad();
    build_patch_index();
  }

  const Conv3dShape& shape() const { return shape_; }

  // Input layout per column: channel-major, then x, y, z (x fastest).
  MatX<S> forward(const MatX<S>& x) {
    assert(x.rows() == shape_.in_size());
    const int batch = int(x.cols());
    const int positions = shape_.out_volume();
    cols_.resize(shape_.patch_size(), positions * batch);
    for (int b = 0; b < batch; ++b) {
      for (int p = 0; p < positions; ++p) {
        auto col = cols_.col(b * positions + p);
        const auto& index = patch_index_[p];
        for (int k = 0; k < shape_.patch_size(); ++k) {
          col[k] = x(index[k], b);
        }
      }
    }
    MatX<S> out_mat = (kernel_ * cols_).colwise() + VecX<S>(bias_.col(0));
    // Repack (out_channels x positions*batch) into columns per sample,
    // channel-major within each position block.
    MatX<S> y(shape_.out_size(), batch);
    for (int b = 0; b < batch; ++b) {
      for (int p = 0; p < positions; ++p) {
        y.block(p * shape_.out_channels, b, shape_.out_channels, 1) =
            out_mat.col(b * positions + p);
      }
    }
    return y;
  }

  MatX<S> backward(const MatX<S>& dy) {
    const int batch = int(dy.cols());
    const int positions = shape_.out_volume();
    MatX<S> dout(shape_.out_channels, positions * batch);
    for (int b = 0; b < batch; ++b) {
      for (int p = 0; p < positions; ++p) {
        dout.col(b * positions + p) =
            dy.block(p * shape_.out_channels, b, shape_.out_channels, 1);
      }
    }
    kernel_grad_ += dout * cols_.transpose();
    bias_grad_.col(0) += dout.rowwise().sum();
    const MatX<S> dcols = kernel_.transpose() * dout;
    MatX<S> dx = MatX<S>::Zero(shape_.in_size(), batch);
    for (int b = 0; b < batch; ++b) {
      for (int p = 0; p < positions; ++p) {
        const auto dcol = dcols.col(b * positions + p);
        const auto& index = patch_index_[p];
        for (int k = 0; k < shape_.patch_size(); ++k) {
          dx(index[k], b) += dcol[k];
        }
      }
    }
    return dx;
  }

  void zero_grad() {
    kernel_grad_ = MatX<S>::Zero(kernel_.rows(), kernel_.cols());
    bias_grad_ = MatX<S>::Zero(bias_.rows(), 1);
  }

  std::vector<ParamRef<S>> params() {
    return {{name_ + ".kernel", &kernel_, &kernel_grad_},
            {name_ + ".bias", &bias_, &bias_grad_}};
  }

 private:
  void build_patch_index() {
    const int positions = shape_.out_volume();
    patch_index_.resize(positions);
    const int ox = shape_.out_dim(0), oy = shape_.out_dim(1);
    const int ix = shape_.in_dims[0], iy = shape_.in_dims[1];
    for (int p = 0; p < positions; ++p) {
      const int px = p % ox;
      const int py = (p / ox) % oy;
      const int pz = p / (ox * oy);
      auto& index = patch_index_[p];
      index.resize(shape_.patch_size());
      int at = 0;
      for (int kz = 0; kz < shape_.kernel; ++kz) {
        for (int ky = 0; ky < shape_.kernel; ++ky) {
          for (int kx = 0; kx < shape_.kernel; ++kx) {
            for (int c = 0; c < shape_.in_channels; ++c) {
              const int vx = px * shape_.stride + kx;
              const int vy = py * shape_.stride + ky;
              const int vz = pz * shape_.stride + kz;
              index[at++] =
                  c + shape_.in_channels * (vx + ix * (vy + iy * vz));
            }
          }
        }
      }
    }
  }

  std::string name_;
  Conv3dShape shape_;
  MatX<S> kernel_, bias_;
  MatX<S> kernel_grad_, bias_grad_;
  MatX<S> cols_;
  std::vector<std::vector<int>> patch_index_;
};

// ---------------------------------------------------------------------------
// MLP: linear layers with ELU between them (none after the last).

template <typename S>
class MlpT {
 public:
  MlpT() = default;
  MlpT(const std::vector<int>& sizes, Rng& rng, std::string name = "mlp")
      : name_(std::move(name)) {
    if (sizes.size() < 2) {
      throw std::invalid_argument("MlpT: need at least input and output size");
    }
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      layers_.emplace_back(sizes[i], sizes[i + 1], rng,
                           name_ + ".fc" + std::to_string(i));
    }
    elus_.resize(layers_.size() > 0 ? layers_.size() - 1 : 0);
  }

  MatX<S> forward(const MatX<S>& x) {
    MatX<S> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].forward(h);
      if (i + 1 < layers_.size()) h = elus_[i].forward(h);
    }
    return h;
  }

  MatX<S> backward(const MatX<S>& dy) {
    MatX<S> g = dy;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (i + 1 < layers_.size()) g = elus_[i].backward(g);
      g = layers_[i].backward(g);
    }
    return g;
  }

  void zero_grad() {
    for (auto& l : layers_) l.zero_grad();
  }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    for (auto& l : layers_) {
      for (auto& p : l.params()) out.push_back(p);
    }
    return out;
  }

  LinearT<S>& layer(std::size_t i) { return layers_[i]; }
  std::size_t layer_count() const { return layers_.size(); }

 private:
  std::string name_;
  std::vector<LinearT<S>> layers_;
  std::vector<EluT<S>> elus_;
};

// ---------------------------------------------------------------------------
// Adam

template <typename S>
class AdamT {
 public:
  explicit AdamT(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }
  std::int64_t step_count() const { return t_; }

  void step(const std::vector<ParamRef<S>>& params) {
    ++t_;
    const double correction1 = 1.0 - std::pow(beta1_, double(t_));
    const double correction2 = 1.0 - std::pow(beta2_, double(t_));
    for (const auto& p : params) {
      auto& m = moment1_[p.name];
      auto& v = moment2_[p.name];
      if (m.size() == 0) {
        m = MatX<S>::Zero(p.value->rows(), p.value->cols());
        v = MatX<S>::Zero(p.value->rows(), p.value->cols());
      }
      m = S(beta1_) * m + S(1.0 - beta1_) * (*p.grad);
      v = (S(beta2_) * v.array() +
           S(1.0 - beta2_) * p.grad->array().square())
              .matrix();
      const auto m_hat = m.array() / S(correction1);
      const auto v_hat = v.array() / S(correction2);
      p.value->array() -= S(lr_) * m_hat / (v_hat.sqrt() + S(eps_));
    }
  }

  void serialize_into(nlohmann::json& meta,
                      std::map<std::string, MatX<S>>& tensors) const {
    meta["adam_step"] = t_;
    for (const auto& [name, m] : moment1_) tensors["adam.m1." + name] = m;
    for (const auto& [name, v] : moment2_) tensors["adam.m2." + name] = v;
  }

  void restore_moment(const std::string& key, const MatX<S>& value) {
    if (key.rfind("adam.m1.", 0) == 0) moment1_[key.substr(8)] = value;
    if (key.rfind("adam.m2.", 0) == 0) moment2_[key.substr(8)] = value;
  }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::map<std::string, MatX<S>> moment1_, moment2_;
};

// ---------------------------------------------------------------------------
// Checkpoint container: magic, version, JSON metadata, named float32 tensors.

class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json meta;

  void put(const std::string& name, const MatX<float>& tensor);
  void put(const std::string& name, const std::vector<float>& data,
           const std::vector<std::uint32_t>& dims);
  bool contains(const std::string& name) const;
  MatX<float> get_matrix(const std::string& name) const;
  const std::vector<float>& get_raw(const std::string& name) const;
  std::vector<std::string> names() const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  struct Entry {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
  };
  std::map<std::string, Entry> tensors_;
};

// Convenience: copy all params into / out of a checkpoint (float only).
inline void store_params(Checkpoint& ck,
                         const std::vector<ParamRef<float>>& params) {
  for (const auto& p : params) ck.put(p.name, *p.value);
}

inline void load_params(const Checkpoint& ck,
                        const std::vector<ParamRef<float>>& params) {
  for (const auto& p : params) {
    const MatX<float> t = ck.get_matrix(p.name);
    if (t.rows() != p.value->rows() || t.cols() != p.value->cols()) {
      throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
    }
    *p.value = t;
  }
}

}  // namespace reorient::nn
