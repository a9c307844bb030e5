#include "cardioprop/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <Eigen/Core>

#include "cardioprop/error.hpp"
#include "cardioprop/random.hpp"

namespace cardioprop {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Rows [y0, y1) of the (channels*k*k) x (pixels) patch matrix.
void im2col(const double* in, int channels, int rows, int cols, int k, int y0, int y1, double* col) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(rows) * cols;
  const std::size_t block = static_cast<std::size_t>(y1 - y0) * cols;
  for (int c = 0; c < channels; ++c) {
    const double* plane = in + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * block;
        const int dx = kx - pad;
        for (int y = y0; y < y1; ++y) {
          const int iy = y + ky - pad;
          double* row = dst + static_cast<std::size_t>(y - y0) * cols;
          if (iy < 0 || iy >= rows) {
            std::fill(row, row + cols, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * cols;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(cols, cols - dx);
          std::fill(row, row + x0, 0.0);
          std::copy(src + x0 + dx, src + x1 + dx, row + x0);
          std::fill(row + std::max(x0, x1), row + cols, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* col, int channels, int rows, int cols, int k, int y0, int y1, double* out) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(rows) * cols;
  const std::size_t block = static_cast<std::size_t>(y1 - y0) * cols;
  for (int c = 0; c < channels; ++c) {
    double* plane = out + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * block;
        const int dx = kx - pad;
        for (int y = y0; y < y1; ++y) {
          const int iy = y + ky - pad;
          if (iy < 0 || iy >= rows) continue;
          const double* row = src + static_cast<std::size_t>(y - y0) * cols;
          double* dst = plane + static_cast<std::size_t>(iy) * cols;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(cols, cols - dx);
          for (int x = x0; x < x1; ++x) dst[x + dx] += row[x];
        }
      }
    }
  }
}

// Rows per im2col block so a block stays around 1 MiB.
int rows_per_block(int patch, int cols, int rows) {
  const long budget = 131072 / std::max(1, patch);
  return std::clamp(static_cast<int>(budget / std::max(1, cols)), 1, rows);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterSet

ParameterSet::ParameterSet(std::vector<Parameter> params) : params_(std::move(params)) {}

ParameterSet ParameterSet::initialize(const NetworkSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Parameter> params;
  for (auto& decl : parameter_decls(spec)) {
    Tensor t(decl.shape, 0.0);
    const auto& name = decl.name;
    if (name.ends_with(".weight")) {
      const std::size_t fan_in = t.size() / static_cast<std::size_t>(decl.shape[0]);
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (double& w : t.values()) w = rng.uniform(-bound, bound);
    } else if (name.ends_with(".gamma") || name.ends_with(".running_var")) {
      std::fill(t.values().begin(), t.values().end(), 1.0);
    }
    params.push_back({decl.name, std::move(t), decl.trainable});
  }
  return ParameterSet(std::move(params));
}

Tensor& ParameterSet::at(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return p.value;
  throw Error("state", "no parameter named '" + std::string(name) + "'");
}

const Tensor& ParameterSet::at(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw Error("state", "no parameter named '" + std::string(name) + "'");
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParameterSet::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_)
    if (p.trainable) {
      p.value.grad();
      p.value.zero_grad();
    }
}

void ParameterSet::validate_against(const NetworkSpec& spec) const {
  const auto decls = parameter_decls(spec);
  if (decls.size() != params_.size())
    throw Error("format", "expected " + std::to_string(decls.size()) + " parameters, found " +
                              std::to_string(params_.size()));
  for (std::size_t i = 0; i < decls.size(); ++i) {
    const auto& d = decls[i];
    const auto& p = params_[i];
    if (p.name != d.name) throw Error("format", "parameter " + std::to_string(i) + " is '" + p.name +
                                                     "', expected '" + d.name + "'");
    if (p.value.shape() != d.shape)
      throw Error("format", "parameter '" + d.name + "' has shape " + shape_string(p.value.shape()) +
                                ", expected " + shape_string(d.shape));
  }
}

// ---------------------------------------------------------------------------
// Network

Network::Network(NetworkSpec spec, std::uint64_t seed)
    : Network(spec, ParameterSet::initialize(spec, seed)) {}

Network::Network(NetworkSpec spec, ParameterSet params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  shapes_ = infer_shapes(spec_);
  params_.validate_against(spec_);

  std::map<std::string, int, std::less<>> index;
  int next = 0;
  for (const auto& in : spec_.inputs) index[in.name] = next++;
  for (const auto& l : spec_.layers) index[l.name] = next++;

  int p = 0;
  for (const auto& l : spec_.layers) {
    std::vector<int> ins;
    for (const auto& name : l.inputs) ins.push_back(index.at(name));
    layer_inputs_.push_back(std::move(ins));
    const bool has_params = l.kind == LayerKind::conv2d || l.kind == LayerKind::conv1x1_head ||
                            l.kind == LayerKind::batchnorm;
    layer_param_.push_back(has_params ? p : -1);
    if (l.kind == LayerKind::batchnorm) p += 5;
    else if (has_params) p += 2;
  }
  for (const auto& o : spec_.outputs) output_nodes_.push_back(index.at(o));
  cache_.resize(spec_.layers.size());
}

int Network::node_index(const std::string& name) const {
  for (std::size_t i = 0; i < spec_.inputs.size(); ++i)
    if (spec_.inputs[i].name == name) return static_cast<int>(i);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i)
    if (spec_.layers[i].name == name) return static_cast<int>(spec_.inputs.size() + i);
  return -1;
}

void Network::release_cache() {
  nodes_.clear();
  grad_buf_.clear();
  for (auto& c : cache_) c = LayerCache{};
  have_forward_ = false;
}

TensorMap Network::forward(const TensorMap& inputs, Mode mode) {
  const std::size_t n_inputs = spec_.inputs.size();
  nodes_.resize(n_inputs + spec_.layers.size());

  batch_ = -1;
  for (std::size_t i = 0; i < n_inputs; ++i) {
    const auto& slot = spec_.inputs[i];
    auto it = inputs.find(slot.name);
    if (it == inputs.end()) throw Error("shape", "missing input '" + slot.name + "'");
    const auto& t = it->second;
    if (t.rank() != 4 || t.dim(1) != slot.channels || t.dim(2) != slot.rows || t.dim(3) != slot.cols)
      throw Error("shape", "input '" + slot.name + "' expects Nx" + std::to_string(slot.channels) + "x" +
                               std::to_string(slot.rows) + "x" + std::to_string(slot.cols) + ", got " +
                               shape_string(t.shape()));
    if (batch_ >= 0 && t.dim(0) != batch_)
      throw Error("shape", "input '" + slot.name + "' batch size differs from other inputs");
    batch_ = t.dim(0);
    if (nodes_[i].shape() == t.shape()) std::copy(t.values().begin(), t.values().end(), nodes_[i].values().begin());
    else nodes_[i] = Tensor(t.shape(), t.values());
  }
  for (const auto& [name, t] : inputs)
    if (!spec_.find_input(name)) throw Error("shape", "unexpected input '" + name + "'");

  const int N = batch_;
  for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
    const auto& layer = spec_.layers[li];
    const auto& shape = shapes_[li];
    const auto& ins = layer_inputs_[li];
    const Tensor& x = nodes_[ins[0]];
    Tensor& y = nodes_[n_inputs + li];
    const std::vector<int> out_shape{N, shape.channels, shape.rows, shape.cols};
    if (y.shape() != out_shape) y = Tensor(out_shape, 0.0);
    auto& cache = cache_[li];
    const std::size_t hw = static_cast<std::size_t>(shape.rows) * shape.cols;

    switch (layer.kind) {
      case LayerKind::conv2d:
      case LayerKind::conv1x1_head: {
        const int k = layer.kind == LayerKind::conv1x1_head ? 1 : layer.kernel;
        const int cin = layer.in_channels;
        const int cout = layer.out_channels;
        const auto& W = params_.items()[layer_param_[li]].value;
        const auto& b = params_.items()[layer_param_[li] + 1].value;
        const int kk = cin * k * k;
        ConstMapMat w(W.data().data(), cout, kk);
        const Eigen::Index ld = static_cast<Eigen::Index>(hw);
        if (k == 1) {
          for (int n = 0; n < N; ++n) {
            ConstMapMat c(x.data().data() + static_cast<std::size_t>(n) * cin * hw, kk, ld);
            MapMat out(y.data().data() + static_cast<std::size_t>(n) * cout * hw, cout, ld);
            out.noalias() = w * c;
            for (int o = 0; o < cout; ++o) out.row(o).array() += b[o];
          }
          break;
        }
        const int step = rows_per_block(kk, shape.cols, shape.rows);
        Buffer col(static_cast<std::size_t>(kk) * step * shape.cols);
        for (int n = 0; n < N; ++n) {
          const double* xin = x.data().data() + static_cast<std::size_t>(n) * cin * hw;
          double* yout = y.data().data() + static_cast<std::size_t>(n) * cout * hw;
          for (int y0 = 0; y0 < shape.rows; y0 += step) {
            const int y1 = std::min(shape.rows, y0 + step);
            const Eigen::Index px = static_cast<Eigen::Index>(y1 - y0) * shape.cols;
            im2col(xin, cin, shape.rows, shape.cols, k, y0, y1, col.data());
            ConstMapMat c(col.data(), kk, px);
            Eigen::Map<RowMat, 0, Eigen::OuterStride<>> out(yout + static_cast<std::size_t>(y0) * shape.cols, cout,
                                                            px, Eigen::OuterStride<>(ld));
            out.noalias() = w * c;
            for (int o = 0; o < cout; ++o) out.row(o).array() += b[o];
          }
        }
        break;
      }
      case LayerKind::batchnorm: {
        const int C = shape.channels;
        const std::size_t M = static_cast<std::size_t>(N) * hw;
        auto& ps = params_.items();
        const auto& gamma = ps[layer_param_[li]].value;
        const auto& beta = ps[layer_param_[li] + 1].value;
        auto& rmean = ps[layer_param_[li] + 2].value;
        auto& rvar = ps[layer_param_[li] + 3].value;
        auto& updates = ps[layer_param_[li] + 4].value;
        // Debiased exponential average: the first batch replaces the initial
        // statistics outright instead of being blended with them.
        double keep = layer.momentum;
        if (mode == Mode::train) {
          updates[0] += 1.0;
          keep = 1.0 - (1.0 - layer.momentum) / (1.0 - std::pow(layer.momentum, updates[0]));
        }
        cache.aux.assign(y.size(), 0.0);
        cache.inv_std.assign(C, 0.0);
        for (int c = 0; c < C; ++c) {
          double mean, var;
          if (mode == Mode::train) {
            double s = 0.0;
            for (int n = 0; n < N; ++n) {
              const double* p = x.data().data() + (static_cast<std::size_t>(n) * C + c) * hw;
              for (std::size_t i = 0; i < hw; ++i) s += p[i];
            }
            mean = s / static_cast<double>(M);
            double v = 0.0;
            for (int n = 0; n < N; ++n) {
              const double* p = x.data().data() + (static_cast<std::size_t>(n) * C + c) * hw;
              for (std::size_t i = 0; i < hw; ++i) v += (p[i] - mean) * (p[i] - mean);
            }
            var = v / static_cast<double>(M);
            const double unbiased = M > 1 ? v / static_cast<double>(M - 1) : var;
            rmean[c] = keep * rmean[c] + (1.0 - keep) * mean;
            rvar[c] = keep * rvar[c] + (1.0 - keep) * unbiased;
          } else {
            mean = rmean[c];
            var = rvar[c];
          }
          const double inv = 1.0 / std::sqrt(var + layer.epsilon);
          cache.inv_std[c] = inv;
          for (int n = 0; n < N; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
            const double* p = x.data().data() + off;
            double* xh = cache.aux.data() + off;
            double* q = y.data().data() + off;
            for (std::size_t i = 0; i < hw; ++i) {
              xh[i] = (p[i] - mean) * inv;
              q[i] = gamma[c] * xh[i] + beta[c];
            }
          }
        }
        break;
      }
      case LayerKind::leaky_relu: {
        const auto xs = x.data();
        auto ys = y.data();
        for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] > 0.0 ? xs[i] : layer.slope * xs[i];
        break;
      }
      case LayerKind::sigmoid: {
        const auto xs = x.data();
        auto ys = y.data();
        for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = stable_sigmoid(xs[i]);
        break;
      }
      case LayerKind::softmax: {
        const int C = shape.channels;
        for (int n = 0; n < N; ++n) {
          const double* p = x.data().data() + static_cast<std::size_t>(n) * C * hw;
          double* q = y.data().data() + static_cast<std::size_t>(n) * C * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < C; ++c) mx = std::max(mx, p[c * hw + i]);
            double s = 0.0;
            for (int c = 0; c < C; ++c) s += (q[c * hw + i] = std::exp(p[c * hw + i] - mx));
            for (int c = 0; c < C; ++c) q[c * hw + i] /= s;
          }
        }
        break;
      }
      case LayerKind::maxpool2: {
        const int C = shape.channels;
        const int in_cols = shape.cols * 2;
        cache.aux.assign(y.size(), 0.0);
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const std::size_t plane = static_cast<std::size_t>(n) * C + c;
            const double* p = x.data().data() + plane * hw * 4;
            double* q = y.data().data() + plane * hw;
            double* arg = cache.aux.data() + plane * hw;
            for (int r = 0; r < shape.rows; ++r)
              for (int s = 0; s < shape.cols; ++s) {
                std::size_t best = static_cast<std::size_t>(2 * r) * in_cols + 2 * s;
                for (int dr = 0; dr < 2; ++dr)
                  for (int ds = 0; ds < 2; ++ds) {
                    const std::size_t idx = static_cast<std::size_t>(2 * r + dr) * in_cols + 2 * s + ds;
                    if (p[idx] > p[best]) best = idx;
                  }
                q[static_cast<std::size_t>(r) * shape.cols + s] = p[best];
                arg[static_cast<std::size_t>(r) * shape.cols + s] = static_cast<double>(best);
              }
          }
        break;
      }
      case LayerKind::upsample2: {
        const int C = shape.channels;
        const int in_rows = shape.rows / 2, in_cols = shape.cols / 2;
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const std::size_t plane = static_cast<std::size_t>(n) * C + c;
            const double* p = x.data().data() + plane * hw / 4;
            double* q = y.data().data() + plane * hw;
            for (int r = 0; r < shape.rows; ++r)
              for (int s = 0; s < shape.cols; ++s)
                q[static_cast<std::size_t>(r) * shape.cols + s] =
                    p[static_cast<std::size_t>(r / 2) * in_cols + s / 2];
            (void)in_rows;
          }
        break;
      }
      case LayerKind::concat: {
        for (int n = 0; n < N; ++n) {
          double* q = y.data().data() + static_cast<std::size_t>(n) * shape.channels * hw;
          for (int src : ins) {
            const Tensor& t = nodes_[src];
            const std::size_t len = static_cast<std::size_t>(t.dim(1)) * hw;
            const double* p = t.data().data() + static_cast<std::size_t>(n) * len;
            q = std::copy(p, p + len, q);
          }
        }
        break;
      }
      case LayerKind::add: {
        auto ys = y.data();
        std::fill(ys.begin(), ys.end(), 0.0);
        for (int src : ins) {
          const auto xs = nodes_[src].data();
          for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += xs[i];
        }
        break;
      }
    }
  }

  have_forward_ = true;
  last_mode_ = mode;
  TensorMap out;
  for (std::size_t i = 0; i < spec_.outputs.size(); ++i)
    out.emplace(spec_.outputs[i], Tensor(nodes_[output_nodes_[i]].shape(), nodes_[output_nodes_[i]].values()));
  return out;
}

void Network::backward(const TensorMap& output_grads) {
  if (!have_forward_) throw Error("state", "backward called before forward");
  const std::size_t n_inputs = spec_.inputs.size();
  const int N = batch_;

  auto& grads = grad_buf_;
  grads.resize(nodes_.size());
  grad_live_.assign(nodes_.size(), false);
  auto grad_of = [&](int node) -> Buffer& {
    auto& g = grads[node];
    if (!grad_live_[node]) {
      g.assign(nodes_[node].size(), 0.0);
      grad_live_[node] = true;
    }
    return g;
  };

  for (const auto& [name, g] : output_grads) {
    const int node = node_index(name);
    if (node < 0 || std::find(output_nodes_.begin(), output_nodes_.end(), node) == output_nodes_.end())
      throw Error("shape", "gradient supplied for unknown output '" + name + "'");
    if (g.shape() != nodes_[node].shape())
      throw Error("shape", "gradient for '" + name + "' has shape " + shape_string(g.shape()) + ", expected " +
                               shape_string(nodes_[node].shape()));
    auto& dst = grad_of(node);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
  }

  for (auto& p : params_.items())
    if (p.trainable) p.value.grad();

  for (std::size_t li = spec_.layers.size(); li-- > 0;) {
    const int self = static_cast<int>(n_inputs + li);
    if (!grad_live_[self]) continue;  // no path to any supplied output gradient
    const Buffer& dy = grads[self];

    const auto& layer = spec_.layers[li];
    const auto& shape = shapes_[li];
    const auto& ins = layer_inputs_[li];
    const bool want_dx = ins[0] >= static_cast<int>(n_inputs);
    const std::size_t hw = static_cast<std::size_t>(shape.rows) * shape.cols;
    const Tensor& y = nodes_[self];
    auto& cache = cache_[li];

    switch (layer.kind) {
      case LayerKind::conv2d:
      case LayerKind::conv1x1_head: {
        const int k = layer.kind == LayerKind::conv1x1_head ? 1 : layer.kernel;
        const int cin = layer.in_channels;
        const int cout = layer.out_channels;
        const int kk = cin * k * k;
        auto& Wt = params_.items()[layer_param_[li]].value;
        auto& bt = params_.items()[layer_param_[li] + 1].value;
        ConstMapMat w(Wt.data().data(), cout, kk);
        MapMat dw(Wt.grad().data(), cout, kk);
        auto& db = bt.grad();
        const Tensor& x = nodes_[ins[0]];
        Buffer* dx = want_dx ? &grad_of(ins[0]) : nullptr;
        const Eigen::Index ld = static_cast<Eigen::Index>(hw);
        for (int n = 0; n < N; ++n) {
          ConstMapMat g(dy.data() + static_cast<std::size_t>(n) * cout * hw, cout, ld);
          for (int o = 0; o < cout; ++o) db[o] += g.row(o).sum();
        }
        if (k == 1) {
          for (int n = 0; n < N; ++n) {
            const double* xin = x.data().data() + static_cast<std::size_t>(n) * cin * hw;
            ConstMapMat c(xin, kk, ld);
            ConstMapMat g(dy.data() + static_cast<std::size_t>(n) * cout * hw, cout, ld);
            dw.noalias() += g * c.transpose();
            if (dx) {
              MapMat d(dx->data() + static_cast<std::size_t>(n) * cin * hw, kk, ld);
              d.noalias() += w.transpose() * g;
            }
          }
          break;
        }
        const int step = rows_per_block(kk, shape.cols, shape.rows);
        Buffer col(static_cast<std::size_t>(kk) * step * shape.cols);
        Buffer dcol(dx ? col.size() : 0);
        for (int n = 0; n < N; ++n) {
          const double* xin = x.data().data() + static_cast<std::size_t>(n) * cin * hw;
          const double* gn = dy.data() + static_cast<std::size_t>(n) * cout * hw;
          for (int y0 = 0; y0 < shape.rows; y0 += step) {
            const int y1 = std::min(shape.rows, y0 + step);
            const Eigen::Index px = static_cast<Eigen::Index>(y1 - y0) * shape.cols;
            im2col(xin, cin, shape.rows, shape.cols, k, y0, y1, col.data());
            ConstMapMat c(col.data(), kk, px);
            Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> g(gn + static_cast<std::size_t>(y0) * shape.cols, cout,
                                                                px, Eigen::OuterStride<>(ld));
            dw.noalias() += g * c.transpose();
            if (dx) {
              MapMat d(dcol.data(), kk, px);
              d.noalias() = w.transpose() * g;
              col2im_add(dcol.data(), cin, shape.rows, shape.cols, k, y0, y1,
                         dx->data() + static_cast<std::size_t>(n) * cin * hw);
            }
          }
        }
        break;
      }
      case LayerKind::batchnorm: {
        const int C = shape.channels;
        const std::size_t M = static_cast<std::size_t>(N) * hw;
        auto& ps = params_.items();
        auto& gamma = ps[layer_param_[li]].value;
        auto& beta = ps[layer_param_[li] + 1].value;
        auto& dgamma = gamma.grad();
        auto& dbeta = beta.grad();
        Buffer* dx = want_dx ? &grad_of(ins[0]) : nullptr;
        for (int c = 0; c < C; ++c) {
          double sum_dy = 0.0, sum_dy_xh = 0.0;
          for (int n = 0; n < N; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              sum_dy += dy[off + i];
              sum_dy_xh += dy[off + i] * cache.aux[off + i];
            }
          }
          dgamma[c] += sum_dy_xh;
          dbeta[c] += sum_dy;
          if (!dx) continue;
          const double g = gamma[c] * cache.inv_std[c];
          for (int n = 0; n < N; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              if (last_mode_ == Mode::train) {
                (*dx)[off + i] += g * (dy[off + i] - sum_dy / static_cast<double>(M) -
                                       cache.aux[off + i] * sum_dy_xh / static_cast<double>(M));
              } else {
                (*dx)[off + i] += g * dy[off + i];
              }
            }
          }
        }
        break;
      }
      case LayerKind::leaky_relu: {
        if (!want_dx) break;
        auto& dx = grad_of(ins[0]);
        const auto xs = nodes_[ins[0]].data();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += xs[i] > 0.0 ? dy[i] : layer.slope * dy[i];
        break;
      }
      case LayerKind::sigmoid: {
        if (!want_dx) break;
        auto& dx = grad_of(ins[0]);
        const auto ys = y.data();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * ys[i] * (1.0 - ys[i]);
        break;
      }
      case LayerKind::softmax: {
        if (!want_dx) break;
        auto& dx = grad_of(ins[0]);
        const int C = shape.channels;
        for (int n = 0; n < N; ++n) {
          const std::size_t base = static_cast<std::size_t>(n) * C * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += y[base + c * hw + i] * dy[base + c * hw + i];
            for (int c = 0; c < C; ++c) {
              const std::size_t j = base + c * hw + i;
              dx[j] += y[j] * (dy[j] - dot);
            }
          }
        }
        break;
      }
      case LayerKind::maxpool2: {
        if (!want_dx) break;
        auto& dx = grad_of(ins[0]);
        const int C = shape.channels;
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const std::size_t plane = static_cast<std::size_t>(n) * C + c;
            for (std::size_t i = 0; i < hw; ++i)
              dx[plane * hw * 4 + static_cast<std::size_t>(cache.aux[plane * hw + i])] += dy[plane * hw + i];
          }
        break;
      }
      case LayerKind::upsample2: {
        if (!want_dx) break;
        auto& dx = grad_of(ins[0]);
        const int C = shape.channels;
        const int in_cols = shape.cols / 2;
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const std::size_t plane = static_cast<std::size_t>(n) * C + c;
            const double* g = dy.data() + plane * hw;
            double* d = dx.data() + plane * hw / 4;
            for (int r = 0; r < shape.rows; ++r)
              for (int s = 0; s < shape.cols; ++s)
                d[static_cast<std::size_t>(r / 2) * in_cols + s / 2] += g[static_cast<std::size_t>(r) * shape.cols + s];
          }
        break;
      }
      case LayerKind::concat: {
        std::size_t ch_off = 0;
        for (int src : ins) {
          const std::size_t len = static_cast<std::size_t>(nodes_[src].dim(1)) * hw;
          if (src >= static_cast<int>(n_inputs)) {
            auto& dx = grad_of(src);
            for (int n = 0; n < N; ++n) {
              const double* g = dy.data() + static_cast<std::size_t>(n) * shape.channels * hw + ch_off;
              double* d = dx.data() + static_cast<std::size_t>(n) * len;
              for (std::size_t i = 0; i < len; ++i) d[i] += g[i];
            }
          }
          ch_off += len;
        }
        break;
      }
      case LayerKind::add: {
        for (int src : ins) {
          if (src < static_cast<int>(n_inputs)) continue;
          auto& dx = grad_of(src);
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
        }
        break;
      }
    }
  }
}

}  // namespace cardioprop
