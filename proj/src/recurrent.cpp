#include "deid/recurrent.hpp"

#include <algorithm>
#include <cmath>

#include "deid/kernels.hpp"

namespace deid {

void LstmParams::init(int input_dim, int hidden_dim, bool literal, Rng& rng) {
  d_in = input_dim;
  d_h = hidden_dim;
  literal_output_gate = literal;
  w_i = Mat64(d_h, d_in + 2 * d_h);
  w_c = Mat64(d_h, d_in + d_h);
  w_o = Mat64(d_h, d_in + 2 * d_h);
  xavier_init(w_i, rng);
  xavier_init(w_c, rng);
  xavier_init(w_o, rng);
  b_i.assign(d_h, 0.0);
  b_c.assign(d_h, 0.0);
  b_o.assign(d_h, 0.0);
}

void LstmParams::check_shapes() const {
  if (w_i.rows != d_h || w_i.cols != d_in + 2 * d_h || w_c.rows != d_h ||
      w_c.cols != d_in + d_h || w_o.rows != d_h || w_o.cols != d_in + 2 * d_h ||
      static_cast<int>(b_i.size()) != d_h || static_cast<int>(b_c.size()) != d_h ||
      static_cast<int>(b_o.size()) != d_h)
    throw Error("lstm: parameter shapes inconsistent with (d_in, d_h)");
}

namespace {

// [x; a; b] packed into a scratch buffer.
void pack3(const Vec64& x, const Vec64& a, const Vec64& b, Vec64& out) {
  out.resize(x.size() + a.size() + b.size());
  std::copy(x.begin(), x.end(), out.begin());
  std::copy(a.begin(), a.end(), out.begin() + x.size());
  std::copy(b.begin(), b.end(), out.begin() + x.size() + a.size());
}

void pack2(const Vec64& x, const Vec64& a, Vec64& out) {
  out.resize(x.size() + a.size());
  std::copy(x.begin(), x.end(), out.begin());
  std::copy(a.begin(), a.end(), out.begin() + x.size());
}

LstmStepCache step_cached(const Vec64& x, const LstmState& prev,
                          const LstmParams& p, Vec64& buf) {
  if (static_cast<int>(x.size()) != p.d_in)
    throw Error("lstm: input dimension mismatch");
  if (static_cast<int>(prev.h.size()) != p.d_h ||
      static_cast<int>(prev.c.size()) != p.d_h)
    throw Error("lstm: state dimension mismatch");

  LstmStepCache s;
  s.x = x;
  s.h_prev = prev.h;
  s.c_prev = prev.c;

  pack3(x, prev.h, prev.c, buf);
  s.i = sigmoid(kernels::matvec(p.w_i, buf, p.b_i));

  pack2(x, prev.h, buf);
  s.g = tanh(kernels::matvec(p.w_c, buf, p.b_c));

  s.c.resize(p.d_h);
  for (int j = 0; j < p.d_h; ++j)
    s.c[j] = (1.0 - s.i[j]) * prev.c[j] + s.i[j] * s.g[j];

  pack3(x, prev.h, p.literal_output_gate ? prev.h : s.c, buf);
  s.o = sigmoid(kernels::matvec(p.w_o, buf, p.b_o));

  s.tanh_c.resize(p.d_h);
  s.h.resize(p.d_h);
  for (int j = 0; j < p.d_h; ++j) {
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = s.o[j] * s.tanh_c[j];
  }
  return s;
}

}  // namespace

LstmState lstm_step(const Vec64& x, const LstmState& prev, const LstmParams& params) {
  params.check_shapes();
  Vec64 buf;
  LstmStepCache s = step_cached(x, prev, params, buf);
  return {std::move(s.h), std::move(s.c)};
}

LstmTrace lstm_forward(const std::vector<Vec64>& xs, const LstmParams& params) {
  params.check_shapes();
  if (xs.empty()) throw Error("lstm: empty input sequence");
  LstmTrace trace;
  trace.steps.reserve(xs.size());
  LstmState state{Vec64(params.d_h, 0.0), Vec64(params.d_h, 0.0)};
  Vec64 buf;
  for (const Vec64& x : xs) {
    trace.steps.push_back(step_cached(x, state, params, buf));
    state.h = trace.steps.back().h;
    state.c = trace.steps.back().c;
  }
  return trace;
}

std::vector<LstmState> run_sequence(const std::vector<Vec64>& xs,
                                    const LstmParams& params, Direction dir) {
  std::vector<Vec64> input = xs;
  if (dir == Direction::backward) std::reverse(input.begin(), input.end());
  LstmTrace trace = lstm_forward(input, params);
  std::vector<LstmState> states(xs.size());
  for (size_t t = 0; t < xs.size(); ++t) {
    size_t src = dir == Direction::backward ? xs.size() - 1 - t : t;
    states[t] = {trace.steps[src].h, trace.steps[src].c};
  }
  return states;
}

void LstmGrads::init_like(const LstmParams& params) {
  dw_i = Mat64(params.w_i.rows, params.w_i.cols);
  dw_c = Mat64(params.w_c.rows, params.w_c.cols);
  dw_o = Mat64(params.w_o.rows, params.w_o.cols);
  db_i.assign(params.d_h, 0.0);
  db_c.assign(params.d_h, 0.0);
  db_o.assign(params.d_h, 0.0);
}

void LstmGrads::accumulate(const LstmGrads& other) {
  for (size_t i = 0; i < dw_i.a.size(); ++i) dw_i.a[i] += other.dw_i.a[i];
  for (size_t i = 0; i < dw_c.a.size(); ++i) dw_c.a[i] += other.dw_c.a[i];
  for (size_t i = 0; i < dw_o.a.size(); ++i) dw_o.a[i] += other.dw_o.a[i];
  add_inplace(db_i, other.db_i);
  add_inplace(db_c, other.db_c);
  add_inplace(db_o, other.db_o);
}

void lstm_backward(const LstmTrace& trace, const LstmParams& params,
                   const std::vector<Vec64>& upstream_dh, LstmGrads* grads,
                   std::vector<Vec64>* dxs) {
  const size_t n = trace.steps.size();
  if (upstream_dh.size() != n) throw Error("lstm backward: upstream length mismatch");
  const int dh = params.d_h;
  const int din = params.d_in;
  if (dxs) {
    dxs->resize(n);
    for (Vec64& v : *dxs)
      if (static_cast<int>(v.size()) != din) v.assign(din, 0.0);
  }

  Vec64 dh_carry(dh, 0.0), dc_carry(dh, 0.0);
  Vec64 dz_i(dh), dz_c(dh), dz_o(dh), dc(dh), dh_total(dh);
  Vec64 buf;

  for (size_t t = n; t-- > 0;) {
    const LstmStepCache& s = trace.steps[t];
    for (int j = 0; j < dh; ++j) dh_total[j] = upstream_dh[t][j] + dh_carry[j];

    // Output gate.
    for (int j = 0; j < dh; ++j) {
      double do_ = dh_total[j] * s.tanh_c[j];
      dz_o[j] = do_ * s.o[j] * (1.0 - s.o[j]);
    }

    // Cell: through h_t, the carried dc, and (unless literal) the o_t peephole.
    for (int j = 0; j < dh; ++j)
      dc[j] = dh_total[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + dc_carry[j];
    if (!params.literal_output_gate)
      kernels::matvec_t_acc(params.w_o, dz_o.data(), din + dh, dh, dc.data());

    // Candidate and input gate.
    for (int j = 0; j < dh; ++j) {
      double dg = dc[j] * s.i[j];
      dz_c[j] = dg * (1.0 - s.g[j] * s.g[j]);
      double di = dc[j] * (s.g[j] - s.c_prev[j]);
      dz_i[j] = di * s.i[j] * (1.0 - s.i[j]);
    }

    // Carries to step t-1.
    for (int j = 0; j < dh; ++j) dc_carry[j] = dc[j] * (1.0 - s.i[j]);
    kernels::matvec_t_acc(params.w_i, dz_i.data(), din + dh, dh, dc_carry.data());

    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    kernels::matvec_t_acc(params.w_i, dz_i.data(), din, dh, dh_carry.data());
    kernels::matvec_t_acc(params.w_c, dz_c.data(), din, dh, dh_carry.data());
    kernels::matvec_t_acc(params.w_o, dz_o.data(), din, dh, dh_carry.data());
    if (params.literal_output_gate)
      kernels::matvec_t_acc(params.w_o, dz_o.data(), din + dh, dh, dh_carry.data());

    if (dxs) {
      double* dx = (*dxs)[t].data();
      kernels::matvec_t_acc(params.w_i, dz_i.data(), 0, din, dx);
      kernels::matvec_t_acc(params.w_c, dz_c.data(), 0, din, dx);
      kernels::matvec_t_acc(params.w_o, dz_o.data(), 0, din, dx);
    }

    if (grads) {
      pack3(s.x, s.h_prev, s.c_prev, buf);
      kernels::outer_acc(grads->dw_i, dz_i.data(), buf.data());
      pack2(s.x, s.h_prev, buf);
      kernels::outer_acc(grads->dw_c, dz_c.data(), buf.data());
      pack3(s.x, s.h_prev, params.literal_output_gate ? s.h_prev : s.c, buf);
      kernels::outer_acc(grads->dw_o, dz_o.data(), buf.data());
      add_inplace(grads->db_i, dz_i);
      add_inplace(grads->db_c, dz_c);
      add_inplace(grads->db_o, dz_o);
    }
  }
}

void BiLstmParams::init(int input_dim, int hidden_dim, bool literal, Rng& rng) {
  fwd.init(input_dim, hidden_dim, literal, rng);
  bwd.init(input_dim, hidden_dim, literal, rng);
}

void BiLstmGrads::init_like(const BiLstmParams& params) {
  fwd.init_like(params.fwd);
  bwd.init_like(params.bwd);
}

BiLstmTrace bilstm_forward(const std::vector<Vec64>& xs, const BiLstmParams& params) {
  BiLstmTrace trace;
  trace.n = xs.size();
  trace.fwd = lstm_forward(xs, params.fwd);
  std::vector<Vec64> rev(xs.rbegin(), xs.rend());
  trace.bwd = lstm_forward(rev, params.bwd);
  return trace;
}

std::vector<Vec64> bilstm_per_element(const BiLstmTrace& trace) {
  const size_t n = trace.n;
  const size_t dh = trace.fwd.steps[0].h.size();
  std::vector<Vec64> out(n, Vec64(2 * dh));
  for (size_t t = 0; t < n; ++t) {
    const Vec64& f = trace.fwd.steps[t].h;
    const Vec64& b = trace.bwd.steps[n - 1 - t].h;
    std::copy(f.begin(), f.end(), out[t].begin());
    std::copy(b.begin(), b.end(), out[t].begin() + dh);
  }
  return out;
}

Vec64 bilstm_summary(const BiLstmTrace& trace) {
  const Vec64& f = trace.fwd.steps.back().h;
  const Vec64& b = trace.bwd.steps.back().h;
  Vec64 out(f.size() + b.size());
  std::copy(f.begin(), f.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + f.size());
  return out;
}

std::vector<Vec64> bilstm_outputs(const std::vector<Vec64>& xs,
                                  const BiLstmParams& params, BiMode mode) {
  BiLstmTrace trace = bilstm_forward(xs, params);
  if (mode == BiMode::per_element) return bilstm_per_element(trace);
  return {bilstm_summary(trace)};
}

void bilstm_backward_per_element(const BiLstmTrace& trace, const BiLstmParams& params,
                                 const std::vector<Vec64>& upstream, BiLstmGrads* grads,
                                 std::vector<Vec64>* dxs) {
  const size_t n = trace.n;
  if (upstream.size() != n) throw Error("bilstm backward: upstream length mismatch");
  const int dh = params.fwd.d_h;
  std::vector<Vec64> dh_fwd(n, Vec64(dh)), dh_bwd(n, Vec64(dh));
  for (size_t t = 0; t < n; ++t) {
    for (int j = 0; j < dh; ++j) {
      dh_fwd[t][j] = upstream[t][j];
      dh_bwd[n - 1 - t][j] = upstream[t][dh + j];
    }
  }
  std::vector<Vec64> dx_fwd, dx_bwd;
  lstm_backward(trace.fwd, params.fwd, dh_fwd, grads ? &grads->fwd : nullptr,
                dxs ? &dx_fwd : nullptr);
  lstm_backward(trace.bwd, params.bwd, dh_bwd, grads ? &grads->bwd : nullptr,
                dxs ? &dx_bwd : nullptr);
  if (dxs) {
    dxs->resize(n);
    for (size_t t = 0; t < n; ++t) {
      if ((*dxs)[t].size() != dx_fwd[t].size()) (*dxs)[t].assign(dx_fwd[t].size(), 0.0);
      for (size_t j = 0; j < dx_fwd[t].size(); ++j)
        (*dxs)[t][j] += dx_fwd[t][j] + dx_bwd[n - 1 - t][j];
    }
  }
}

void bilstm_backward_summary(const BiLstmTrace& trace, const BiLstmParams& params,
                             const Vec64& upstream, BiLstmGrads* grads,
                             std::vector<Vec64>* dxs) {
  const size_t n = trace.n;
  const int dh = params.fwd.d_h;
  if (static_cast<int>(upstream.size()) != 2 * dh)
    throw Error("bilstm backward: summary upstream must have dim 2*d_h");
  std::vector<Vec64> dh_fwd(n, Vec64(dh, 0.0)), dh_bwd(n, Vec64(dh, 0.0));
  for (int j = 0; j < dh; ++j) {
    dh_fwd[n - 1][j] = upstream[j];
    dh_bwd[n - 1][j] = upstream[dh + j];
  }
  std::vector<Vec64> dx_fwd, dx_bwd;
  lstm_backward(trace.fwd, params.fwd, dh_fwd, grads ? &grads->fwd : nullptr,
                dxs ? &dx_fwd : nullptr);
  lstm_backward(trace.bwd, params.bwd, dh_bwd, grads ? &grads->bwd : nullptr,
                dxs ? &dx_bwd : nullptr);
  if (dxs) {
    dxs->resize(n);
    for (size_t t = 0; t < n; ++t) {
      if ((*dxs)[t].size() != dx_fwd[t].size()) (*dxs)[t].assign(dx_fwd[t].size(), 0.0);
      for (size_t j = 0; j < dx_fwd[t].size(); ++j)
        (*dxs)[t][j] += dx_fwd[t][j] + dx_bwd[n - 1 - t][j];
    }
  }
}

}  // namespace deid
