#include "vqwave/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vqwave/error.hpp"

namespace vqwave::nn {

namespace {

using StridedMap = Eigen::Map<Matrix, Eigen::Unaligned, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const Matrix, Eigen::Unaligned, Eigen::OuterStride<>>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw invalid_input(std::string(op) + ": shape mismatch " + a.value().shape_string() + " vs " +
                        b.value().shape_string());
  }
}

void accumulate(Tape& t, int id, const Tensor& g) {
  if (!t.requires_grad(id)) return;
  t.grad_accumulator(id).mat() += g.mat();
}

Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> as_row(const Tensor& t) {
  return {t.data(), 1, static_cast<Eigen::Index>(t.size())};
}

Scalar sigmoid_scalar(Scalar x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  out.mat() = a.value().mat() + b.value().mat();
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
    accumulate(t, ia, t.grad(self));
    accumulate(t, ib, t.grad(self));
  }, "add");
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  out.mat() = a.value().mat() - b.value().mat();
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
    accumulate(t, ia, t.grad(self));
    if (t.requires_grad(ib)) t.grad_accumulator(ib).mat() -= t.grad(self).mat();
  }, "sub");
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  out.mat() = a.value().mat().cwiseProduct(b.value().mat());
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
    const auto& g = t.grad(self).mat();
    if (t.requires_grad(ia)) t.grad_accumulator(ia).mat() += g.cwiseProduct(t.value(ib).mat());
    if (t.requires_grad(ib)) t.grad_accumulator(ib).mat() += g.cwiseProduct(t.value(ia).mat());
  }, "mul");
}

Var scale(Var a, Scalar s) {
  Tensor out(a.shape());
  out.mat() = a.value().mat() * s;
  const int ia = a.id;
  return a.tape->record(std::move(out), {a}, [ia, s](Tape& t, int self) {
    if (t.requires_grad(ia)) t.grad_accumulator(ia).mat() += t.grad(self).mat() * s;
  }, "scale");
}

Var sum(Var a) {
  Tensor out({1}, a.value().mat().sum());
  const int ia = a.id;
  return a.tape->record(std::move(out), {a}, [ia](Tape& t, int self) {
    if (t.requires_grad(ia)) t.grad_accumulator(ia).mat().array() += t.grad(self)[0];
  }, "sum");
}

Var mean(Var a) {
  const auto n = static_cast<Scalar>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw invalid_input("matmul: inner dimension mismatch " + a.value().shape_string() + " x " +
                        b.value().shape_string());
  }
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  out.mat().noalias() = a.value().mat() * b.value().mat();
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
    const auto g = t.grad(self).mat();
    if (t.requires_grad(ia)) t.grad_accumulator(ia).mat().noalias() += g * t.value(ib).mat().transpose();
    if (t.requires_grad(ib)) t.grad_accumulator(ib).mat().noalias() += t.value(ia).mat().transpose() * g;
  }, "matmul");
}

Var dense(Var x, Var w, Var bias) {
  if (x.cols() != w.rows()) {
    throw invalid_input("dense: input width " + std::to_string(x.cols()) + " does not match weight " +
                        w.value().shape_string());
  }
  const bool has_bias = bias.valid();
  if (has_bias && static_cast<std::int64_t>(bias.value().size()) != w.cols()) {
    throw invalid_input("dense: bias size does not match output width");
  }
  Tensor out = Tensor::matrix(x.rows(), w.cols());
  out.mat().noalias() = x.value().mat() * w.value().mat();
  if (has_bias) out.mat().rowwise() += as_row(bias.value());
  const int ix = x.id, iw = w.id, ib = has_bias ? bias.id : -1;
  return x.tape->record(std::move(out), {x, w, bias}, [ix, iw, ib](Tape& t, int self) {
    const auto g = t.grad(self).mat();
    if (t.requires_grad(ix)) t.grad_accumulator(ix).mat().noalias() += g * t.value(iw).mat().transpose();
    if (t.requires_grad(iw)) t.grad_accumulator(iw).mat().noalias() += t.value(ix).mat().transpose() * g;
    if (ib >= 0 && t.requires_grad(ib)) {
      Tensor& gb = t.grad_accumulator(ib);
      Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(gb.data(), 1, static_cast<Eigen::Index>(gb.size())) +=
          g.colwise().sum();
    }
  }, "dense");
}

Var relu(Var x) {
  Tensor out(x.shape());
  out.mat() = x.value().mat().cwiseMax(0.0);
  const int ix = x.id;
  return x.tape->record(std::move(out), {x}, [ix](Tape& t, int self) {
    if (!t.requires_grad(ix)) return;
    const auto& y = t.value(self);
    const auto& g = t.grad(self);
    Tensor& gx = t.grad_accumulator(ix);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] > 0.0) gx[i] += g[i];
    }
  }, "relu");
}

Var tanh(Var x) {
  Tensor out(x.shape());
  out.mat() = x.value().mat().array().tanh();
  const int ix = x.id;
  return x.tape->record(std::move(out), {x}, [ix](Tape& t, int self) {
    if (!t.requires_grad(ix)) return;
    const auto y = t.value(self).mat().array();
    t.grad_accumulator(ix).mat().array() += t.grad(self).mat().array() * (1.0 - y * y);
  }, "tanh");
}

Var sigmoid(Var x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(x.value()[i]);
  const int ix = x.id;
  return x.tape->record(std::move(out), {x}, [ix](Tape& t, int self) {
    if (!t.requires_grad(ix)) return;
    const auto y = t.value(self).mat().array();
    t.grad_accumulator(ix).mat().array() += t.grad(self).mat().array() * y * (1.0 - y);
  }, "sigmoid");
}

Var stop_gradient(Var x) { return x.tape->constant(x.value(), "stop_gradient"); }

Var straight_through(Var e, const Tensor& replacement) {
  if (!e.value().same_shape(replacement)) throw invalid_input("straight_through: shape mismatch");
  const int ie = e.id;
  return e.tape->record(replacement, {e}, [ie](Tape& t, int self) { accumulate(t, ie, t.grad(self)); },
                        "straight_through");
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw invalid_input("concat_cols: no inputs");
  const auto rows = parts.front().rows();
  std::int64_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw invalid_input("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Tensor out = Tensor::matrix(rows, cols);
  std::vector<int> ids;
  std::vector<std::int64_t> offsets;
  std::int64_t off = 0;
  for (const Var& p : parts) {
    out.mat().middleCols(off, p.cols()) = p.value().mat();
    ids.push_back(p.id);
    offsets.push_back(off);
    off += p.cols();
  }
  return parts.front().tape->record(std::move(out), parts, [ids, offsets](Tape& t, int self) {
    const auto g = t.grad(self).mat();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Tensor& gp = t.grad_accumulator(ids[k]);
      gp.mat() += g.middleCols(offsets[k], gp.cols());
    }
  }, "concat_cols");
}

Var repeat_rows(Var x, int factor) {
  if (factor < 1) throw invalid_input("repeat_rows: factor must be positive");
  const auto rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::matrix(rows * factor, cols);
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto src = x.value().row(r);
    for (int k = 0; k < factor; ++k) std::copy(src.begin(), src.end(), out.row(r * factor + k).begin());
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {x}, [ix, factor, rows](Tape& t, int self) {
    if (!t.requires_grad(ix)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_accumulator(ix);
    for (std::int64_t r = 0; r < rows; ++r) {
      gx.mat().row(r) += g.mat().middleRows(r * factor, factor).colwise().sum();
    }
  }, "repeat_rows");
}

Var sequence_mean(Var x, int batch) {
  if (batch < 1 || x.rows() % batch != 0) throw invalid_input("sequence_mean: rows not divisible by batch");
  const auto len = x.rows() / batch;
  Tensor out = Tensor::matrix(batch, x.cols());
  for (int b = 0; b < batch; ++b) out.mat().row(b) = x.value().mat().middleRows(b * len, len).colwise().mean();
  const int ix = x.id;
  return x.tape->record(std::move(out), {x}, [ix, batch, len](Tape& t, int self) {
    if (!t.requires_grad(ix)) return;
    const auto g = t.grad(self).mat();
    Tensor& gx = t.grad_accumulator(ix);
    for (int b = 0; b < batch; ++b) {
      gx.mat().middleRows(b * len, len).rowwise() += g.row(b) / static_cast<Scalar>(len);
    }
  }, "sequence_mean");
}

Var mean_squared_distance(Var a, Var b) {
  require_same_shape(a, b, "mean_squared_distance");
  const Var d = sub(a, b);
  return scale(sum(mul(d, d)), 1.0 / static_cast<Scalar>(std::max<std::int64_t>(a.rows(), 1)));
}

Var softmax_cross_entropy(Var logits, std::span<const int> targets) {
  const auto n = logits.rows(), c = logits.cols();
  if (static_cast<std::int64_t>(targets.size()) != n) {
    throw invalid_input("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(n) + " rows");
  }
  for (int target : targets) {
    if (target < 0 || target >= c) {
      throw invalid_input("softmax_cross_entropy: target " + std::to_string(target) + " outside [0, " +
                          std::to_string(c - 1) + "]");
    }
  }
  const Tensor& z = logits.value();
  Scalar total = 0.0;
  for (std::int64_t r = 0; r < n; ++r) {
    const auto row = z.mat().row(r).array();
    const Scalar mx = row.maxCoeff();
    total += std::log((row - mx).exp().sum()) + mx - row(targets[r]);
  }
  Tensor out({1}, total / static_cast<Scalar>(n));
  std::vector<int> tgt(targets.begin(), targets.end());
  const int iz = logits.id;
  return logits.tape->record(std::move(out), {logits}, [iz, tgt = std::move(tgt)](Tape& t, int self) {
    if (!t.requires_grad(iz)) return;
    const Tensor& zv = t.value(iz);
    Tensor& gz = t.grad_accumulator(iz);
    const auto rows = zv.rows();
    const Scalar g = t.grad(self)[0] / static_cast<Scalar>(rows);
    Eigen::Array<Scalar, 1, Eigen::Dynamic> e(zv.cols());
    for (std::int64_t r = 0; r < rows; ++r) {
      const auto row = zv.mat().row(r).array();
      e = (row - row.maxCoeff()).exp();
      gz.mat().row(r).array() += (g / e.sum()) * e;
      gz.at(r, tgt[static_cast<std::size_t>(r)]) -= g;
    }
  }, "softmax_cross_entropy");
}

Var negative_squared_distance(Var x, const Tensor& codes) {
  if (x.cols() != codes.cols()) throw invalid_input("negative_squared_distance: dimension mismatch");
  const Tensor& xv = x.value();
  Tensor out = Tensor::matrix(x.rows(), codes.rows());
  out.mat().noalias() = 2.0 * xv.mat() * codes.mat().transpose();
  const Eigen::VectorXd xn = xv.mat().rowwise().squaredNorm();
  const Eigen::RowVectorXd cn = codes.mat().rowwise().squaredNorm().transpose();
  out.mat().colwise() -= xn;
  out.mat().rowwise() -= cn;
  const int ix = x.id;
  return x.tape->record(std::move(out), {x}, [ix, codes](Tape& t, int self) {
    if (!t.requires_grad(ix)) return;
    const auto g = t.grad(self).mat();
    const auto xm = t.value(ix).mat();
    Tensor& gx = t.grad_accumulator(ix);
    // d/dx of (2 x.c - |x|^2 - |c|^2) = 2c - 2x
    gx.mat().noalias() += 2.0 * g * codes.mat();
    gx.mat() -= 2.0 * (xm.array().colwise() * g.rowwise().sum().array()).matrix();
  }, "negative_squared_distance");
}

Var conv1d(Var x, Var w, Var bias, int batch, int kernel, int stride) {
  if (batch < 1 || x.rows() % batch != 0) throw invalid_input("conv1d: rows not divisible by batch");
  if (kernel < 1 || stride < 1) throw invalid_input("conv1d: kernel and stride must be positive");
  const auto cin = x.cols();
  if (w.rows() != kernel * cin) {
    throw invalid_input("conv1d: channel mismatch, input has " + std::to_string(cin) + " channels but weight " +
                        w.value().shape_string() + " expects " + std::to_string(w.rows() / kernel));
  }
  const int len = static_cast<int>(x.rows() / batch);
  const int out_len = conv1d_output_length(len, stride);
  const int pad_total = std::max((out_len - 1) * stride + kernel - len, 0);
  const int pad_left = pad_total / 2;

  Tensor col = Tensor::matrix(static_cast<std::int64_t>(batch) * out_len, kernel * cin);
  const Tensor& xv = x.value();
  for (int b = 0; b < batch; ++b) {
    for (int to = 0; to < out_len; ++to) {
      auto dst = col.row(static_cast<std::int64_t>(b) * out_len + to);
      for (int k = 0; k < kernel; ++k) {
        const int ti = to * stride + k - pad_left;
        if (ti < 0 || ti >= len) continue;
        const auto src = xv.row(static_cast<std::int64_t>(b) * len + ti);
        std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(k) * cin);
      }
    }
  }
  Tensor out = Tensor::matrix(col.rows(), w.cols());
  out.mat().noalias() = col.mat() * w.value().mat();
  const bool has_bias = bias.valid();
  if (has_bias) out.mat().rowwise() += as_row(bias.value());

  const int ix = x.id, iw = w.id, ib = has_bias ? bias.id : -1;
  return x.tape->record(std::move(out), {x, w, bias},
                        [ix, iw, ib, col = std::move(col), batch, len, out_len, kernel, stride, pad_left,
                         cin](Tape& t, int self) {
    const auto g = t.grad(self).mat();
    if (t.requires_grad(iw)) t.grad_accumulator(iw).mat().noalias() += col.mat().transpose() * g;
    if (ib >= 0 && t.requires_grad(ib)) {
      Tensor& gb = t.grad_accumulator(ib);
      Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(gb.data(), 1, static_cast<Eigen::Index>(gb.size())) +=
          g.colwise().sum();
    }
    if (t.requires_grad(ix)) {
      Matrix dcol = g * t.value(iw).mat().transpose();
      Tensor& gx = t.grad_accumulator(ix);
      for (int b = 0; b < batch; ++b) {
        for (int to = 0; to < out_len; ++to) {
          const auto r = static_cast<std::int64_t>(b) * out_len + to;
          for (int k = 0; k < kernel; ++k) {
            const int ti = to * stride + k - pad_left;
            if (ti < 0 || ti >= len) continue;
            gx.mat().row(static_cast<std::int64_t>(b) * len + ti) += dcol.row(r).segment(k * cin, cin);
          }
        }
      }
    }
  }, "conv1d");
}

Var batchnorm(Var x, Var gamma, Var beta, BatchNormStats& stats, Mode mode, Scalar eps, Scalar momentum) {
  const auto n = x.rows(), c = x.cols();
  if (static_cast<std::int64_t>(gamma.value().size()) != c || static_cast<std::int64_t>(beta.value().size()) != c) {
    throw invalid_input("batchnorm: parameter size does not match channel count");
  }
  if (stats.running_mean.size() != static_cast<std::size_t>(c)) {
    throw invalid_input("batchnorm: running statistics do not match channel count");
  }
  Eigen::RowVectorXd mu(c), var(c);
  if (mode == Mode::Train) {
    if (n < 1) throw invalid_input("batchnorm: empty batch");
    mu = x.value().mat().colwise().mean();
    var = (x.value().mat().rowwise() - mu).array().square().colwise().mean();
    const Scalar unbias = n > 1 ? static_cast<Scalar>(n) / static_cast<Scalar>(n - 1) : 1.0;
    for (std::int64_t j = 0; j < c; ++j) {
      stats.running_mean[j] = (1.0 - momentum) * stats.running_mean[j] + momentum * mu[j];
      stats.running_var[j] = (1.0 - momentum) * stats.running_var[j] + momentum * var[j] * unbias;
    }
  } else {
    for (std::int64_t j = 0; j < c; ++j) {
      mu[j] = stats.running_mean[j];
      var[j] = stats.running_var[j];
    }
  }
  const Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
  Tensor xhat = Tensor::matrix(n, c);
  xhat.mat() = (x.value().mat().rowwise() - mu).array().rowwise() * inv_std.array();
  Tensor out = Tensor::matrix(n, c);
  out.mat() = (xhat.mat().array().rowwise() * as_row(gamma.value()).array()).rowwise() + as_row(beta.value()).array();

  const int ix = x.id, ig = gamma.id, ibeta = beta.id;
  const bool train = mode == Mode::Train;
  return x.tape->record(std::move(out), {x, gamma, beta},
                        [ix, ig, ibeta, xhat = std::move(xhat), inv_std, train](Tape& t, int self) {
    const auto g = t.grad(self).mat();
    const Eigen::RowVectorXd gsum = g.colwise().sum();
    const Eigen::RowVectorXd gxhat_sum = g.cwiseProduct(xhat.mat()).colwise().sum();
    if (t.requires_grad(ibeta)) {
      Tensor& gb = t.grad_accumulator(ibeta);
      for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += gsum[static_cast<Eigen::Index>(j)];
    }
    if (t.requires_grad(ig)) {
      Tensor& gg = t.grad_accumulator(ig);
      for (std::size_t j = 0; j < gg.size(); ++j) gg[j] += gxhat_sum[static_cast<Eigen::Index>(j)];
    }
    if (!t.requires_grad(ix)) return;
    const Tensor& gam = t.value(ig);
    const Eigen::RowVectorXd scale_row = as_row(gam).array() * inv_std.array();
    Tensor& gx = t.grad_accumulator(ix);
    if (train) {
      const auto n_rows = static_cast<Scalar>(g.rows());
      // dx = gamma/sigma * (g - mean(g) - xhat * mean(g * xhat))
      gx.mat().array() += ((g.rowwise() - gsum / n_rows).array() -
                           xhat.mat().array().rowwise() * (gxhat_sum / n_rows).array())
                              .rowwise() *
                          scale_row.array();
    } else {
      gx.mat().array() += g.array().rowwise() * scale_row.array();
    }
  }, "batchnorm");
}

Var gru_recurrence(Var gates, Var w_hh, Var b_hh, int batch, int repeat, const RowLookupInput* extra,
                   const Tensor* h0) {
  const auto hidden = w_hh.rows();
  if (w_hh.cols() != 3 * hidden) throw invalid_input("gru: recurrent weight must be [H x 3H]");
  if (static_cast<std::int64_t>(b_hh.value().size()) != 3 * hidden) throw invalid_input("gru: bias must have 3H values");
  if (gates.cols() != 3 * hidden) {
    throw invalid_input("gru: input gates have " + std::to_string(gates.cols()) + " columns, expected " +
                        std::to_string(3 * hidden));
  }
  if (batch < 1 || gates.rows() % batch != 0) throw invalid_input("gru: rows not divisible by batch");
  if (repeat < 1) throw invalid_input("gru: repeat must be positive");
  const auto frames = gates.rows() / batch;
  const auto steps = frames * repeat;
  const auto total = steps * batch;
  if (extra != nullptr) {
    if (static_cast<std::int64_t>(extra->index.size()) != total || extra->value.size() != extra->index.size()) {
      throw invalid_input("gru: row lookup input must supply one entry per output step");
    }
    if (extra->weight.cols() != 3 * hidden) throw invalid_input("gru: row lookup weight must have 3H columns");
    for (int idx : extra->index) {
      if (idx < 0 || idx >= extra->weight.rows()) throw invalid_input("gru: row lookup index out of range");
    }
  }
  if (h0 != nullptr && (h0->rows() != batch || h0->cols() != hidden)) throw invalid_input("gru: h0 must be [batch x H]");

  const Matrix w_rz = w_hh.value().mat().leftCols(2 * hidden);
  const Matrix w_n = w_hh.value().mat().rightCols(hidden);
  const Eigen::RowVectorXd b_rz = as_row(b_hh.value()).head(2 * hidden);
  const Eigen::RowVectorXd b_n = as_row(b_hh.value()).tail(hidden);

  // Internal buffers are time-major (row t*batch + b) so that every step
  // touches one contiguous block; the output is batch-major.
  Tensor hs = Tensor::matrix(total, hidden);
  Tensor r_all = Tensor::matrix(total, hidden), z_all = Tensor::matrix(total, hidden);
  Tensor n_all = Tensor::matrix(total, hidden), rh_all = Tensor::matrix(total, hidden);
  Matrix h_start = h0 != nullptr ? Matrix(h0->mat()) : Matrix::Zero(batch, hidden);
  Matrix gx(batch, 3 * hidden), hrz(batch, 2 * hidden), a(batch, hidden);
  const Tensor& gv = gates.value();
  const Tensor* wv = extra != nullptr ? &extra->weight.value() : nullptr;

  auto block = [&](Tensor& m, std::int64_t t) { return MatrixMap(m.data() + t * batch * hidden, batch, hidden); };
  for (std::int64_t t = 0; t < steps; ++t) {
    for (int b = 0; b < batch; ++b) {
      gx.row(b) = gv.mat().row(b * frames + t / repeat);
      if (wv != nullptr) {
        const auto row = static_cast<std::size_t>(b * steps + t);
        gx.row(b) += extra->value[row] * wv->mat().row(extra->index[row]);
      }
    }
    const ConstMatrixMap h_prev = t == 0 ? ConstMatrixMap(h_start.data(), batch, hidden)
                                         : ConstMatrixMap(hs.data() + (t - 1) * batch * hidden, batch, hidden);
    hrz.noalias() = h_prev * w_rz;
    hrz.rowwise() += b_rz;
    auto r = block(r_all, t), z = block(z_all, t), n = block(n_all, t), rh = block(rh_all, t), h = block(hs, t);
    r = (1.0 + (-(gx.leftCols(hidden) + hrz.leftCols(hidden)).array()).exp()).inverse().matrix();
    z = (1.0 + (-(gx.middleCols(hidden, hidden) + hrz.rightCols(hidden)).array()).exp()).inverse().matrix();
    rh = r.cwiseProduct(h_prev);
    a.noalias() = rh * w_n;
    a.rowwise() += b_n;
    // tanh(x) = 2 / (1 + exp(-2x)) - 1, which vectorises where tanh does not.
    n = (2.0 / (1.0 + (-2.0 * (gx.rightCols(hidden) + a).array()).exp()) - 1.0).matrix();
    h = ((1.0 - z.array()) * n.array() + z.array() * h_prev.array()).matrix();
  }

  Tensor out = Tensor::matrix(total, hidden);
  for (std::int64_t t = 0; t < steps; ++t)
    for (int b = 0; b < batch; ++b) out.mat().row(b * steps + t) = hs.mat().row(t * batch + b);

  const int ig = gates.id, iw = w_hh.id, ib = b_hh.id;
  const int iextra = extra != nullptr ? extra->weight.id : -1;
  std::vector<int> extra_index = extra != nullptr ? extra->index : std::vector<int>{};
  std::vector<Scalar> extra_value = extra != nullptr ? extra->value : std::vector<Scalar>{};
  std::vector<Var> inputs{gates, w_hh, b_hh};
  if (extra != nullptr) inputs.push_back(extra->weight);

  return gates.tape->record(
      std::move(out), inputs,
      [=, hs = std::move(hs), r_all = std::move(r_all), z_all = std::move(z_all), n_all = std::move(n_all),
       rh_all = std::move(rh_all), h_start = std::move(h_start), extra_index = std::move(extra_index),
       extra_value = std::move(extra_value)](Tape& t, int self) {
        const Tensor& gout = t.grad(self);
        Tensor dgx = Tensor::matrix(total, 3 * hidden);  // time-major
        Matrix carry = Matrix::Zero(batch, hidden);
        Matrix dh(batch, hidden), dz(batch, hidden), drh(batch, hidden);
        const Eigen::OuterStride<> seq_stride(steps * hidden);
        auto cblock = [&](const Tensor& m, std::int64_t s) {
          return ConstMatrixMap(m.data() + s * batch * hidden, batch, hidden);
        };
        for (std::int64_t s = steps - 1; s >= 0; --s) {
          const ConstMatrixMap hp = s == 0 ? ConstMatrixMap(h_start.data(), batch, hidden) : cblock(hs, s - 1);
          const auto r = cblock(r_all, s), z = cblock(z_all, s), n = cblock(n_all, s);
          MatrixMap dg(dgx.data() + s * batch * 3 * hidden, batch, 3 * hidden);
          dh = ConstStridedMap(gout.data() + s * hidden, batch, hidden, seq_stride) + carry;
          dz = dh.cwiseProduct(hp - n);
          dg.rightCols(hidden) = (dh.array() * (1.0 - z.array()) * (1.0 - n.array().square())).matrix();
          carry = dh.cwiseProduct(z);
          drh.noalias() = dg.rightCols(hidden) * w_n.transpose();
          carry += drh.cwiseProduct(r);
          dg.leftCols(hidden) = (drh.array() * hp.array() * r.array() * (1.0 - r.array())).matrix();
          dg.middleCols(hidden, hidden) = (dz.array() * z.array() * (1.0 - z.array())).matrix();
          carry.noalias() += dg.leftCols(2 * hidden) * w_rz.transpose();
        }
        if (t.requires_grad(iw)) {
          Tensor& gw = t.grad_accumulator(iw);
          const auto dgm = dgx.mat();
          // Previous hidden states are h_start for step 0, then hs shifted by one step.
          gw.mat().leftCols(2 * hidden).noalias() += h_start.transpose() * dgm.topRows(batch).leftCols(2 * hidden);
          if (steps > 1) {
            gw.mat().leftCols(2 * hidden).noalias() +=
                hs.mat().topRows(total - batch).transpose() * dgm.bottomRows(total - batch).leftCols(2 * hidden);
          }
          gw.mat().rightCols(hidden).noalias() += rh_all.mat().transpose() * dgm.rightCols(hidden);
        }
        if (t.requires_grad(ib)) {
          Tensor& gb = t.grad_accumulator(ib);
          Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(gb.data(), 1, 3 * hidden) += dgx.mat().colwise().sum();
        }
        if (t.requires_grad(ig)) {
          Tensor& gg = t.grad_accumulator(ig);
          for (std::int64_t s = 0; s < steps; ++s)
            for (int b = 0; b < batch; ++b) gg.mat().row(b * frames + s / repeat) += dgx.mat().row(s * batch + b);
        }
        if (iextra >= 0 && t.requires_grad(iextra)) {
          Tensor& ge = t.grad_accumulator(iextra);
          for (std::int64_t s = 0; s < steps; ++s)
            for (int b = 0; b < batch; ++b) {
              const auto row = static_cast<std::size_t>(b * steps + s);
              ge.mat().row(extra_index[row]) += extra_value[row] * dgx.mat().row(s * batch + b);
            }
        }
      },
      "gru_recurrence");
}

}  // namespace vqwave::nn
