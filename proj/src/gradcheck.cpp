#include "blink/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "blink/convlstm.hpp"
#include "blink/model.hpp"
#include "blink/ops.hpp"
#include "blink/train.hpp"

namespace blink {

namespace {

constexpr double kOpTol = 1e-4;
constexpr double kOpStep = 1e-4;
constexpr double kKinkStep = 1e-5;  // relu/maxpool compositions
constexpr double kE2eTol = 1e-3;
constexpr double kE2eStep = 1e-5;

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

Tensor<double> rand_input(Shape shape, RngStream& rng, double lo = -1.0,
                          double hi = 1.0) {
  Tensor<double> t = uniform_tensor<double>(shape, rng, lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Keeps relu arguments away from the kink so the difference quotient stays
// one-sided.
void avoid_kink(Tensor<double>& t, double margin) {
  for (int64_t i = 0; i < t.numel(); ++i) {
    double& x = t.data()[i];
    if (std::abs(x) < margin) x = x < 0 ? -margin : margin;
  }
}

// Separates every 2x2 pool window's top two values so a step-h perturbation
// cannot flip the argmax.
void separate_pool_windows(Tensor<double>& t, double gap) {
  const int n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y + 1 < h; y += 2)
        for (int x = 0; x + 1 < w; x += 2) {
          double* base = t.data() + ((static_cast<int64_t>(ni) * c + ci) * h + y) * w + x;
          double* cells[4] = {base, base + 1, base + w, base + w + 1};
          int top = 0;
          for (int k = 1; k < 4; ++k)
            if (*cells[k] > *cells[top]) top = k;
          double second = -1e300;
          for (int k = 0; k < 4; ++k)
            if (k != top) second = std::max(second, *cells[k]);
          if (*cells[top] - second < gap) *cells[top] = second + gap;
        }
}

struct CaseRun {
  std::vector<Tensor<double>> leaves;
  std::function<Tensor<double>()> forward;
};

// Max relative error over every element of every leaf.
double check_full(CaseRun& run, double step) {
  Tape<double> tape;
  std::vector<std::vector<double>> analytic;
  {
    TapeScope<double> scope(tape);
    Tensor<double> loss = run.forward();
    for (Tensor<double>& l : run.leaves) l.zero_grad();
    tape.backward(loss);
  }
  for (const Tensor<double>& l : run.leaves) analytic.push_back(l.grad_vec());

  double worst = 0.0;
  for (size_t li = 0; li < run.leaves.size(); ++li) {
    Tensor<double>& l = run.leaves[li];
    for (int64_t j = 0; j < l.numel(); ++j) {
      const double keep = l.data()[j];
      l.data()[j] = keep + step;
      const double up = run.forward().item();
      l.data()[j] = keep - step;
      const double dn = run.forward().item();
      l.data()[j] = keep;
      worst = std::max(worst, rel_err(analytic[li][j], (up - dn) / (2.0 * step)));
    }
  }
  return worst;
}

// Same, but only `per_leaf_frac` of each leaf's elements (at least one).
// A deep relu/maxpool composition can have a kink inside the probe interval;
// the analytic value then equals one of the one-sided slopes, so score each
// element against the best of the central and one-sided estimates.
double check_sampled(CaseRun& run, double step, double per_leaf_frac,
                     RngStream& rng) {
  Tape<double> tape;
  std::vector<std::vector<double>> analytic;
  {
    TapeScope<double> scope(tape);
    Tensor<double> loss = run.forward();
    for (Tensor<double>& l : run.leaves) l.zero_grad();
    tape.backward(loss);
  }
  for (const Tensor<double>& l : run.leaves) analytic.push_back(l.grad_vec());
  const double mid = run.forward().item();

  double worst = 0.0;
  for (size_t li = 0; li < run.leaves.size(); ++li) {
    Tensor<double>& l = run.leaves[li];
    const int64_t n = l.numel();
    const int64_t want = std::max<int64_t>(
        1, static_cast<int64_t>(std::llround(per_leaf_frac * static_cast<double>(n))));
    for (int64_t s = 0; s < want; ++s) {
      const int64_t j = rng.uniform_int(0, n - 1);
      const double keep = l.data()[j];
      l.data()[j] = keep + step;
      const double up = run.forward().item();
      l.data()[j] = keep - step;
      const double dn = run.forward().item();
      l.data()[j] = keep;
      const double a = analytic[li][j];
      const double err = std::min({rel_err(a, (up - dn) / (2.0 * step)),
                                   rel_err(a, (up - mid) / step),
                                   rel_err(a, (mid - dn) / step)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

using CaseFactory = std::function<CaseRun(RngStream&)>;

struct OpCase {
  const char* name;
  double step;
  CaseFactory make;
};

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  auto add_case = [&](const char* name, double step, CaseFactory f) {
    cases.push_back({name, step, std::move(f)});
  };

  add_case("add", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({3, 4}, rng), rand_input({3, 4}, rng)};
    r.forward = [=] { return sum_all(add(r.leaves[0], r.leaves[1])); };
    return r;
  });
  add_case("mul", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({3, 4}, rng), rand_input({3, 4}, rng)};
    r.forward = [=] { return sum_all(mul(r.leaves[0], r.leaves[1])); };
    return r;
  });
  add_case("scale", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({3, 4}, rng)};
    r.forward = [=] { return sum_all(scale(r.leaves[0], 1.7)); };
    return r;
  });
  add_case("dense", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({2, 3}, rng), rand_input({3, 4}, rng),
                rand_input({4}, rng)};
    r.forward = [=] {
      return sum_all(mul(dense(r.leaves[0], r.leaves[1], r.leaves[2]),
                         dense(r.leaves[0], r.leaves[1], r.leaves[2])));
    };
    return r;
  });
  add_case("conv2d_same", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({2, 3, 5, 5}, rng), rand_input({4, 3, 3, 3}, rng),
                rand_input({4}, rng)};
    r.forward = [=] {
      Tensor<double> y = conv2d(r.leaves[0], r.leaves[1], r.leaves[2], 1, 1,
                                Padding::Same);
      return sum_all(mul(y, y));
    };
    return r;
  });
  add_case("conv2d_dilated", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({1, 2, 5, 5}, rng), rand_input({2, 2, 3, 3}, rng),
                rand_input({2}, rng)};
    r.forward = [=] {
      Tensor<double> y = conv2d(r.leaves[0], r.leaves[1], r.leaves[2], 1, 2,
                                Padding::Same);
      return sum_all(mul(y, y));
    };
    return r;
  });
  add_case("conv2d_strided_valid", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({1, 3, 6, 6}, rng), rand_input({2, 3, 3, 3}, rng),
                rand_input({2}, rng)};
    r.forward = [=] {
      Tensor<double> y = conv2d(r.leaves[0], r.leaves[1], r.leaves[2], 2, 1,
                                Padding::Valid);
      return sum_all(mul(y, y));
    };
    return r;
  });
  add_case("conv_sigmoid_sum", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({1, 2, 4, 4}, rng), rand_input({3, 2, 3, 3}, rng),
                rand_input({3}, rng)};
    r.forward = [=] {
      return sum_all(sigmoid(
          conv2d(r.leaves[0], r.leaves[1], r.leaves[2], 1, 1, Padding::Same)));
    };
    return r;
  });
  add_case("maxpool2", kOpStep, [](RngStream& rng) {
    CaseRun r;
    Tensor<double> x = rand_input({2, 3, 4, 4}, rng);
    separate_pool_windows(x, 1e-2);
    r.leaves = {x};
    r.forward = [=] {
      Tensor<double> y = maxpool2(r.leaves[0]);
      return sum_all(mul(y, y));
    };
    return r;
  });
  add_case("sigmoid", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({3, 4}, rng, -2.0, 2.0)};
    r.forward = [=] { return sum_all(sigmoid(r.leaves[0])); };
    return r;
  });
  add_case("tanh", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({3, 4}, rng, -2.0, 2.0)};
    r.forward = [=] { return sum_all(tanh_op(r.leaves[0])); };
    return r;
  });
  add_case("relu", kOpStep, [](RngStream& rng) {
    CaseRun r;
    Tensor<double> x = rand_input({3, 4}, rng);
    avoid_kink(x, 1e-2);
    r.leaves = {x};
    r.forward = [=] {
      Tensor<double> y = relu(r.leaves[0]);
      return sum_all(mul(y, y));
    };
    return r;
  });
  add_case("softmax", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({3, 5}, rng, -2.0, 2.0)};
    r.forward = [=] {
      Tensor<double> p = softmax_last(r.leaves[0]);
      return sum_all(mul(p, p));
    };
    return r;
  });
  add_case("softmax_cross_entropy", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({4, 5}, rng, -2.0, 2.0)};
    std::vector<int> labels;
    for (int i = 0; i < 4; ++i)
      labels.push_back(static_cast<int>(rng.uniform_int(0, 4)));
    r.forward = [=] {
      return cross_entropy_mean(softmax_last(r.leaves[0]), labels);
    };
    return r;
  });
  add_case("channel_scale", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({2, 3, 4, 4}, rng), rand_input({3}, rng)};
    r.forward = [=] {
      Tensor<double> y = channel_scale(r.leaves[0], r.leaves[1]);
      return sum_all(mul(y, y));
    };
    return r;
  });
  add_case("mask_mul", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({2, 3, 4, 4}, rng), rand_input({2, 1, 4, 4}, rng)};
    r.forward = [=] {
      Tensor<double> y = mask_mul(r.leaves[0], r.leaves[1]);
      return sum_all(mul(y, y));
    };
    return r;
  });
  add_case("reshape", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({2, 6}, rng)};
    r.forward = [=] {
      Tensor<double> y = reshape(r.leaves[0], {3, 4});
      return sum_all(mul(y, y));
    };
    return r;
  });
  add_case("stack0_select0", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({2, 3}, rng), rand_input({2, 3}, rng)};
    r.forward = [=] {
      Tensor<double> s = stack0(std::vector<Tensor<double>>{r.leaves[0], r.leaves[1]});
      Tensor<double> y = add(select0(s, 0), mul(select0(s, 1), select0(s, 1)));
      return sum_all(y);
    };
    return r;
  });
  add_case("dropout", kOpStep, [](RngStream& rng) {
    CaseRun r;
    r.leaves = {rand_input({4, 6}, rng)};
    const uint64_t mask_seed = rng.next_u64();
    r.forward = [=] {
      RngStream drop(mask_seed);
      Tensor<double> y = dropout(r.leaves[0], 0.3, true, drop);
      return sum_all(mul(y, y));
    };
    return r;
  });
  add_case("convlstm_cell", kOpStep, [](RngStream& rng) {
    CaseRun r;
    RngStream init = rng.split(7);
    ConvLSTMLayer<double> layer = init_convlstm<double>(2, 3, 3, false, init);
    CellState<double> st;
    st.h = rand_input({1, 3, 3, 3}, rng, -0.5, 0.5);
    st.c = rand_input({1, 3, 3, 3}, rng, -0.5, 0.5);
    Tensor<double> x = rand_input({1, 2, 3, 3}, rng);
    r.leaves = {x,         st.h,      st.c,      layer.wxi, layer.whi, layer.bi,
                layer.wxf, layer.whf, layer.bf,  layer.wxc, layer.whc, layer.bc,
                layer.wxo, layer.who, layer.bo,  layer.wci, layer.wcf, layer.wco};
    for (Tensor<double>& l : r.leaves) l.set_requires_grad(true);
    r.forward = [=] {
      RngStream unused(0);
      CellState<double> next = cell_step(x, st, layer, 0.0, false, unused);
      return add(sum_all(mul(next.h, next.h)), sum_all(mul(next.c, next.c)));
    };
    return r;
  });
  add_case("convlstm_cell_convpeep", kOpStep, [](RngStream& rng) {
    CaseRun r;
    RngStream init = rng.split(9);
    ConvLSTMLayer<double> layer = init_convlstm<double>(2, 2, 3, true, init);
    // Zero-initialized peepholes hide their gradient path; randomize them.
    uint64_t peep_id = 11;
    for (Tensor<double>* t : {&layer.wci, &layer.wcf, &layer.wco}) {
      RngStream pr = rng.split(peep_id++);
      Tensor<double> fresh = uniform_tensor<double>(t->shape(), pr, -0.3, 0.3);
      std::copy(fresh.data(), fresh.data() + fresh.numel(), t->data());
    }
    CellState<double> st;
    st.h = rand_input({1, 2, 2, 2}, rng, -0.5, 0.5);
    st.c = rand_input({1, 2, 2, 2}, rng, -0.5, 0.5);
    Tensor<double> x = rand_input({1, 2, 2, 2}, rng);
    r.leaves = {x,         st.h,      st.c,      layer.wxi, layer.whi, layer.bi,
                layer.wxf, layer.whf, layer.bf,  layer.wxc, layer.whc, layer.bc,
                layer.wxo, layer.who, layer.bo,  layer.wci, layer.wcf, layer.wco};
    for (Tensor<double>& l : r.leaves) l.set_requires_grad(true);
    r.forward = [=] {
      RngStream unused(0);
      CellState<double> next = cell_step(x, st, layer, 0.0, false, unused);
      return add(sum_all(mul(next.h, next.h)), sum_all(mul(next.c, next.c)));
    };
    return r;
  });
  add_case("convlstm_stack_t3", kOpStep, [](RngStream& rng) {
    CaseRun r;
    RngStream init = rng.split(13);
    std::vector<ConvLSTMLayer<double>> layers = {
        init_convlstm<double>(2, 2, 3, false, init)};
    std::vector<Tensor<double>> xs = {rand_input({1, 2, 2, 2}, rng),
                                      rand_input({1, 2, 2, 2}, rng),
                                      rand_input({1, 2, 2, 2}, rng)};
    ConvLSTMLayer<double>& y = layers[0];
    r.leaves = {xs[0],  xs[1],  xs[2],  y.wxi, y.whi, y.bi,  y.wxf,
                y.whf,  y.bf,   y.wxc,  y.whc, y.bc,  y.wxo, y.who,
                y.bo,   y.wci,  y.wcf,  y.wco};
    for (Tensor<double>& l : r.leaves) l.set_requires_grad(true);
    r.forward = [=] {
      RngStream unused(0);
      std::vector<Tensor<double>> hs =
          stack_forward(xs, layers, 0.0, false, unused);
      Tensor<double> acc;
      for (const Tensor<double>& h : hs) {
        Tensor<double> s = sum_all(mul(h, h));
        acc = acc.defined() ? add(acc, s) : s;
      }
      return acc;
    };
    return r;
  });
  add_case("attention_masking", kKinkStep, [](RngStream& rng) {
    CaseRun r;
    ModelConfig mc;
    mc.input_size = 8;
    mc.att_channels = {2, 1};
    mc.att_dilations = {1, 2};
    mc.blocks = {{2}};
    mc.lstm_layers = 1;
    mc.lstm_channels = 2;
    mc.trunk = 4;
    RngStream init = rng.split(17);
    ModelParams<double> p = init_model<double>(mc, init);
    Tensor<double> x = rand_input({1, 3, 8, 8}, rng, 0.0, 1.0);
    r.leaves = {x};
    for (size_t i = 0; i < p.att_w.size(); ++i) {
      r.leaves.push_back(p.att_w[i]);
      r.leaves.push_back(p.att_b[i]);
    }
    for (Tensor<double>& l : r.leaves) l.set_requires_grad(true);
    r.forward = [=] {
      auto [masked, mask] = attention_apply(x, p);
      return add(sum_all(mul(masked, masked)), sum_all(mask));
    };
    return r;
  });

  return cases;
}

CaseRun e2e_case(RngStream& rng) {
  // Desk-shape model shrunk to a 16x16 canvas.
  ModelConfig mc;
  mc.input_size = 16;
  RngStream init = rng.split(1);
  ModelParams<double> p = init_model<double>(mc, init);
  p.mark_trainable();
  // Zero-initialised biases leave relu pre-activations exactly on the kink
  // wherever an input patch is all zeros; nudge every parameter off that.
  RngStream jit = rng.split(5);
  for (Tensor<double>& l : p.all())
    for (int64_t j = 0; j < l.numel(); ++j) l.data()[j] += jit.uniform(-0.05, 0.05);

  const int t_len = 2, batch = 2;
  std::vector<Tensor<double>> frames;
  RngStream fr = rng.split(2);
  for (int t = 0; t < t_len; ++t)
    frames.push_back(uniform_tensor<double>({batch, 3, 16, 16}, fr, 0.0, 1.0));
  std::vector<std::vector<FrameLabels>> labels(t_len);
  RngStream lr = rng.split(3);
  for (int t = 0; t < t_len; ++t)
    for (int n = 0; n < batch; ++n) {
      FrameLabels l;
      l.left = static_cast<Light>(lr.uniform_int(0, kNumLight - 1));
      l.right = static_cast<Light>(lr.uniform_int(0, kNumLight - 1));
      l.intent = static_cast<Intent>(lr.uniform_int(0, kNumIntent - 1));
      l.view = static_cast<View>(lr.uniform_int(0, kNumView - 1));
      labels[t].push_back(l);
    }
  const uint64_t drop_seed = rng.split(4).next_u64();

  CaseRun r;
  r.leaves = p.all();
  r.forward = [=] {
    RngStream drop(drop_seed);
    RunCtx ctx;
    ctx.training = true;
    ctx.dropout_p = 0.25;
    ctx.rng = &drop;
    std::vector<FrameOut<double>> outs = forward_sequence(frames, p, ctx);
    GammaWeights gamma;
    return multitask_loss(outs, labels, gamma, LossMode::Full);
  };
  return r;
}

}  // namespace

bool GradCheckReport::all_pass() const {
  for (const GradCheckCase& c : cases)
    if (!c.pass) return false;
  return !cases.empty();
}

std::string GradCheckReport::table() const {
  std::ostringstream out;
  out << "case                        max rel err   tolerance  result\n";
  for (const GradCheckCase& c : cases) {
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%-26s  %11.3e  %10.0e  %s\n", c.name.c_str(),
                  c.max_rel_err, c.tolerance, c.pass ? "pass" : "FAIL");
    out << buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "total %.1fs, %s\n", seconds,
                all_pass() ? "all passed" : "FAILURES present");
  out << buf;
  return out.str();
}

GradCheckReport run_gradcheck(int seeds, bool e2e, std::ostream* progress) {
  if (seeds < 1) seeds = 1;
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport report;

  for (const OpCase& oc : op_cases()) {
    GradCheckCase c;
    c.name = oc.name;
    c.tolerance = kOpTol;
    for (int s = 0; s < seeds; ++s) {
      RngStream rng(0x9e3779b97f4a7c15ull ^ static_cast<uint64_t>(s));
      CaseRun run = oc.make(rng);
      c.max_rel_err = std::max(c.max_rel_err, check_full(run, oc.step));
    }
    c.pass = c.max_rel_err < c.tolerance;
    if (progress)
      (*progress) << "[gradcheck] " << c.name << " max rel err " << c.max_rel_err
                  << (c.pass ? "" : "  FAIL") << "\n"
                  << std::flush;
    report.cases.push_back(std::move(c));
  }

  if (e2e) {
    GradCheckCase c;
    c.name = "end_to_end_multitask";
    c.tolerance = kE2eTol;
    RngStream rng(0x5eed5eed5eed5eedull);
    CaseRun run = e2e_case(rng);
    RngStream pick = rng.split(99);
    c.max_rel_err = check_sampled(run, kE2eStep, 0.01, pick);
    c.pass = c.max_rel_err < c.tolerance;
    if (progress)
      (*progress) << "[gradcheck] " << c.name << " max rel err " << c.max_rel_err
                  << (c.pass ? "" : "  FAIL") << "\n"
                  << std::flush;
    report.cases.push_back(std::move(c));
  }

  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace blink
