#pragma once

#include <vector>

#include "deid/numerics.hpp"

namespace deid {

// Coupled-gate LSTM with peepholes:
//   i_t = sigma(W_i [x_t; h_{t-1}; c_{t-1}] + b_i)
//   c_t = (1 - i_t) o c_{t-1} + i_t o tanh(W_c [x_t; h_{t-1}] + b_c)
//   o_t = sigma(W_o [x_t; h_{t-1}; c_t] + b_o)
//   h_t = o_t o tanh(c_t)
// The forget weight is exactly (1 - i_t); there is no independent forget
// gate. With literal_output_gate set, the output gate's third input slot is
// h_{t-1} instead of c_t (the duplicated-h variant), selectable for
// comparison and recorded in every checkpoint.
struct LstmParams {
  int d_in = 0;
  int d_h = 0;
  bool literal_output_gate = false;
  Mat64 w_i, w_c, w_o;  // (d_h, d_in+2*d_h), (d_h, d_in+d_h), (d_h, d_in+2*d_h)
  Vec64 b_i, b_c, b_o;

  void init(int input_dim, int hidden_dim, bool literal, Rng& rng);
  void check_shapes() const;
};

struct LstmState {
  Vec64 h, c;
};

LstmState lstm_step(const Vec64& x, const LstmState& prev, const LstmParams& params);

enum class Direction { forward, backward };

// Iterates lstm_step from the zero state. Backward direction processes the
// inputs reversed and reports states in original element order.
std::vector<LstmState> run_sequence(const std::vector<Vec64>& xs,
                                    const LstmParams& params, Direction dir);

// Cached forward pass, one entry per step in processing order.
struct LstmStepCache {
  Vec64 x, h_prev, c_prev;
  Vec64 i, g, c, o, tanh_c, h;
};

struct LstmTrace {
  std::vector<LstmStepCache> steps;
};

LstmTrace lstm_forward(const std::vector<Vec64>& xs, const LstmParams& params);

struct LstmGrads {
  Mat64 dw_i, dw_c, dw_o;
  Vec64 db_i, db_c, db_o;

  void init_like(const LstmParams& params);
  void accumulate(const LstmGrads& other);
};

// Exact reverse-mode pass. upstream_dh[t] is dLoss/dh_t in processing order;
// gradients accumulate into *grads, and dLoss/dx_t (processing order) is
// added into (*dxs)[t] when dxs is non-null.
void lstm_backward(const LstmTrace& trace, const LstmParams& params,
                   const std::vector<Vec64>& upstream_dh, LstmGrads* grads,
                   std::vector<Vec64>* dxs);

struct BiLstmParams {
  LstmParams fwd, bwd;

  void init(int input_dim, int hidden_dim, bool literal, Rng& rng);
};

struct BiLstmGrads {
  LstmGrads fwd, bwd;

  void init_like(const BiLstmParams& params);
};

enum class BiMode { per_element, summary };

struct BiLstmTrace {
  LstmTrace fwd, bwd;  // bwd ran over the reversed inputs
  size_t n = 0;
};

BiLstmTrace bilstm_forward(const std::vector<Vec64>& xs, const BiLstmParams& params);

// per_element: n vectors [fwd_h_t ; bwd_h_t] of dim 2*d_h in original order.
// summary: one vector [fwd_h_n ; bwd_h_n] (the two final states).
std::vector<Vec64> bilstm_per_element(const BiLstmTrace& trace);
Vec64 bilstm_summary(const BiLstmTrace& trace);
std::vector<Vec64> bilstm_outputs(const std::vector<Vec64>& xs,
                                  const BiLstmParams& params, BiMode mode);

// Backward passes matching the two output modes. dxs (original order) is
// accumulated when non-null.
void bilstm_backward_per_element(const BiLstmTrace& trace, const BiLstmParams& params,
                                 const std::vector<Vec64>& upstream, BiLstmGrads* grads,
                                 std::vector<Vec64>* dxs);
void bilstm_backward_summary(const BiLstmTrace& trace, const BiLstmParams& params,
                             const Vec64& upstream, BiLstmGrads* grads,
                             std::vector<Vec64>* dxs);

}  // namespace deid
