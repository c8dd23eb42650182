#include "neuro/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace neuro::recurrent {

namespace {

double g_value(Activation kind, double b) { return feedforward::activation(kind, b).value; }
double g_prime(Activation kind, double b) { return feedforward::activation(kind, b).derivative; }

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

bool differentiable(Activation a) {
    return a == Activation::identity || a == Activation::sigmoid || a == Activation::tanh ||
           a == Activation::relu;
}

double resolve_dt(const RecurrentNet& net, const RelaxOptions& options) {
    const double dt = options.dt.value_or(net.tau / 10.0);
    require(dt > 0.0 && dt < net.tau, "relaxation: need 0 < dt < tau");
    require(options.tol > 0.0, "relaxation: tol must be positive");
    return dt;
}

Vector hidden_fields(const RecurrentNet& net, std::span<const double> state, std::span<const double> input) {
    const std::size_t n = net.hidden_count(), k = net.input_count();
    Vector b(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = -net.theta_v[i];
        for (std::size_t j = 0; j < n; ++j) s += net.w_vv(i, j) * state[j];
        for (std::size_t j = 0; j < k; ++j) s += net.w_vx(i, j) * input[j];
        b[i] = s;
    }
    return b;
}

/// Runs x <- x + (dt/tau)(F(x) - x) from zero until |F(x) - x| < tol,
/// i.e. until the velocity times tau is below tol. `target` writes F(x).
template <typename Target>
Relaxation euler(std::size_t n, double rate, const RelaxOptions& options, Target target) {
    Relaxation r;
    r.state.assign(n, 0.0);
    Vector f(n);
    for (; r.steps < options.max_steps; ++r.steps) {
        target(r.state, f);
        double largest = 0.0;
        for (std::size_t i = 0; i < n; ++i) largest = std::max(largest, std::abs(f[i] - r.state[i]));
        if (!std::isfinite(largest)) {
            r.report = "relaxation produced non-finite values after " + std::to_string(r.steps) + " steps";
            break;
        }
        if (largest < options.tol) {
            r.converged = true;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) r.state[i] += rate * (f[i] - r.state[i]);
    }
    if (!r.converged && r.report.empty())
        r.report = "relaxation did not settle within " + std::to_string(options.max_steps) +
                   " steps (unstable fixed point?)";
    target(r.state, f);
    for (std::size_t i = 0; i < n; ++i) r.residual = std::max(r.residual, std::abs(r.state[i] - f[i]));
    return r;
}

}  // namespace

RecurrentNet::RecurrentNet(std::size_t hidden, std::size_t inputs, std::size_t outputs)
    : w_vv(hidden, hidden),
      w_vx(hidden, inputs),
      w_ov(outputs, hidden),
      theta_v(hidden, 0.0),
      theta_o(outputs, 0.0) {}

void RecurrentNet::initialize(RandomStream& rng, double stddev) {
    for (Matrix* m : {&w_vv, &w_vx, &w_ov})
        for (double& w : m->data()) w = rng.gaussian(0.0, stddev);
    std::fill(theta_v.begin(), theta_v.end(), 0.0);
    std::fill(theta_o.begin(), theta_o.end(), 0.0);
}

void RecurrentNet::validate() const {
    const std::size_t n = hidden_count();
    require(w_vv.cols() == n, "recurrent net: w_vv must be square");
    require(w_vx.rows() == n, "recurrent net: w_vx rows must equal the hidden count");
    require(w_ov.cols() == n, "recurrent net: w_ov columns must equal the hidden count");
    require(theta_v.size() == n, "recurrent net: theta_v size must equal the hidden count");
    require(theta_o.size() == w_ov.rows(), "recurrent net: theta_o size must equal the output count");
    require(tau > 0.0, "recurrent net: tau must be positive");
    require(differentiable(g) && differentiable(g_out), "recurrent net: activations must be element-wise");
}

Vector parameters(const RecurrentNet& net) {
    Vector p;
    p.reserve(net.w_vv.size() + net.w_vx.size() + net.w_ov.size() + net.theta_v.size() + net.theta_o.size());
    for (const Matrix* m : {&net.w_vv, &net.w_vx, &net.w_ov}) p.insert(p.end(), m->data().begin(), m->data().end());
    p.insert(p.end(), net.theta_v.begin(), net.theta_v.end());
    p.insert(p.end(), net.theta_o.begin(), net.theta_o.end());
    return p;
}

void set_parameters(RecurrentNet& net, std::span<const double> p) {
    const std::size_t total =
        net.w_vv.size() + net.w_vx.size() + net.w_ov.size() + net.theta_v.size() + net.theta_o.size();
    require(p.size() == total, "set_parameters: wrong parameter count");
    auto it = p.begin();
    for (Matrix* m : {&net.w_vv, &net.w_vx, &net.w_ov}) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(m->size()), m->data().begin());
        it += static_cast<std::ptrdiff_t>(m->size());
    }
    for (Vector* v : {&net.theta_v, &net.theta_o}) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(v->size()), v->begin());
        it += static_cast<std::ptrdiff_t>(v->size());
    }
}

Relaxation relax_states(const RecurrentNet& net, std::span<const double> input, const RelaxOptions& options) {
    net.validate();
    require(input.size() == net.input_count(), "relax_states: input size mismatch");
    const double rate = resolve_dt(net, options) / net.tau;
    Relaxation r = euler(net.hidden_count(), rate, options, [&](const Vector& v, Vector& f) {
        const Vector b = hidden_fields(net, v, input);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = g_value(net.g, b[i]);
    });
    r.fields = hidden_fields(net, r.state, input);
    return r;
}

Relaxation relax_errors(const RecurrentNet& net, const Relaxation& states, std::span<const double> errors,
                        const RelaxOptions& options) {
    net.validate();
    const std::size_t n = net.hidden_count();
    require(errors.size() == n && states.fields.size() == n, "relax_errors: size mismatch");
    if (!states.converged) {
        Relaxation r;
        r.state.assign(n, 0.0);
        r.report = "state relaxation did not converge: " + states.report;
        return r;
    }
    const double rate = resolve_dt(net, options) / net.tau;
    Vector gp(n);
    for (std::size_t j = 0; j < n; ++j) gp[j] = g_prime(net.g, states.fields[j]);
    return euler(n, rate, options, [&](const Vector& d, Vector& f) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = errors[j];
            for (std::size_t i = 0; i < n; ++i) s += d[i] * net.w_vv(i, j);
            f[j] = gp[j] * s;
        }
    });
}

Vector solve_errors(const RecurrentNet& net, std::span<const double> fields, std::span<const double> errors) {
    const std::size_t n = net.hidden_count();
    require(fields.size() == n && errors.size() == n, "solve_errors: size mismatch");
    Vector gp(n);
    for (std::size_t j = 0; j < n; ++j) gp[j] = g_prime(net.g, fields[j]);
    // L^T u = E with L = I - diag(g') W, then D = g' u.
    Matrix lt(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lt(j, i) = (i == j ? 1.0 : 0.0) - gp[i] * net.w_vv(i, j);
    Vector u = solve_linear(lt, errors);
    for (std::size_t j = 0; j < n; ++j) u[j] *= gp[j];
    return u;
}

Vector output_errors(std::span<const double> state, std::span<const std::size_t> output_units,
                     std::span<const double> targets) {
    require(output_units.size() == targets.size(), "output_errors: one target per output unit");
    Vector e(state.size(), 0.0);
    for (std::size_t k = 0; k < output_units.size(); ++k) {
        require(output_units[k] < state.size(), "output_errors: output unit out of range");
        e[output_units[k]] = targets[k] - state[output_units[k]];
    }
    return e;
}

std::optional<double> steady_energy(const RecurrentNet& net, std::span<const double> input,
                                    std::span<const std::size_t> output_units, std::span<const double> targets,
                                    const RelaxOptions& options) {
    const Relaxation r = relax_states(net, input, options);
    if (!r.converged) return std::nullopt;
    const Vector e = output_errors(r.state, output_units, targets);
    return 0.5 * dot(e, e);
}

BpStep recurrent_bp_step(RecurrentNet& net, std::span<const double> input, std::span<const std::size_t> output_units,
                         std::span<const double> targets, double eta, const RelaxOptions& options) {
    BpStep step;
    const Relaxation v = relax_states(net, input, options);
    if (!v.converged) {
        step.report = v.report;
        return step;
    }
    const Vector e = output_errors(v.state, output_units, targets);
    step.energy = 0.5 * dot(e, e);
    const Relaxation d = relax_errors(net, v, e, options);
    if (!d.converged) {
        step.report = d.report;
        return step;
    }
    const std::size_t n = net.hidden_count(), k = net.input_count();
    for (std::size_t m = 0; m < n; ++m) {
        const double dm = eta * d.state[m];
        for (std::size_t j = 0; j < n; ++j) net.w_vv(m, j) += dm * v.state[j];
        for (std::size_t j = 0; j < k; ++j) net.w_vx(m, j) += dm * input[j];
        net.theta_v[m] -= dm;
    }
    step.updated = true;
    return step;
}

// ---------------------------------------------------------------------------
// Backpropagation through time

void SequenceTask::validate() const {
    require(inputs.rows() >= 1, "sequence task: need T >= 1");
    require(targets.rows() == inputs.rows(), "sequence task: inputs and targets differ in length");
}

SequenceTrace run_sequence(const RecurrentNet& net, const Matrix& inputs, std::span<const double> initial_state) {
    net.validate();
    const std::size_t t_max = inputs.rows(), n = net.hidden_count(), m = net.output_count();
    require(inputs.cols() == net.input_count(), "run_sequence: input width mismatch");
    require(initial_state.empty() || initial_state.size() == n, "run_sequence: initial state size mismatch");
    SequenceTrace tr{Matrix(t_max + 1, n), Matrix(t_max, n), Matrix(t_max, m), Matrix(t_max, m)};
    if (!initial_state.empty()) std::copy(initial_state.begin(), initial_state.end(), tr.states.row(0).begin());
    for (std::size_t t = 1; t <= t_max; ++t) {
        const Vector b = hidden_fields(net, tr.states.row(t - 1), inputs.row(t - 1));
        for (std::size_t i = 0; i < n; ++i) {
            tr.fields(t - 1, i) = b[i];
            tr.states(t, i) = g_value(net.g, b[i]);
        }
        for (std::size_t i = 0; i < m; ++i) {
            double s = -net.theta_o[i];
            for (std::size_t j = 0; j < n; ++j) s += net.w_ov(i, j) * tr.states(t, j);
            tr.output_fields(t - 1, i) = s;
            tr.outputs(t - 1, i) = g_value(net.g_out, s);
        }
    }
    return tr;
}

double sequence_energy(const RecurrentNet& net, const SequenceTask& task, std::span<const double> initial_state) {
    task.validate();
    require(task.targets.cols() == net.output_count(), "sequence_energy: target width mismatch");
    const SequenceTrace tr = run_sequence(net, task.inputs, initial_state);
    double h = 0.0;
    for (std::size_t k = 0; k < tr.outputs.size(); ++k) {
        const double e = task.targets.data()[k] - tr.outputs.data()[k];
        h += 0.5 * e * e;
    }
    return h;
}

Vector BpttGradients::flatten() const {
    Vector p;
    for (const Matrix* m : {&w_vv, &w_vx, &w_ov}) p.insert(p.end(), m->data().begin(), m->data().end());
    p.insert(p.end(), theta_v.begin(), theta_v.end());
    p.insert(p.end(), theta_o.begin(), theta_o.end());
    return p;
}

namespace {

/// Shared by the full and truncated variants. depth = 0 means unlimited.
BpttGradients bptt(const RecurrentNet& net, const SequenceTask& task, std::size_t depth,
                   std::span<const double> initial_state) {
    task.validate();
    require(task.targets.cols() == net.output_count(), "bptt: target width mismatch");
    const SequenceTrace tr = run_sequence(net, task.inputs, initial_state);
    const std::size_t t_max = task.length(), n = net.hidden_count(), k = net.input_count(),
                      m = net.output_count();

    BpttGradients gr{Matrix(n, n), Matrix(n, k), Matrix(m, n), Vector(n, 0.0), Vector(m, 0.0), 0.0,
                     Matrix(t_max, n)};

    // Output errors Delta_t = E_t g_out'(B_t), stored by time row.
    Matrix out_delta(t_max, m);
    Matrix gp(t_max, n);
    for (std::size_t t = 0; t < t_max; ++t) {
        for (std::size_t i = 0; i < m; ++i) {
            const double e = task.targets(t, i) - tr.outputs(t, i);
            gr.energy += 0.5 * e * e;
            out_delta(t, i) = e * g_prime(net.g_out, tr.output_fields(t, i));
        }
        for (std::size_t j = 0; j < n; ++j) gp(t, j) = g_prime(net.g, tr.fields(t, j));
    }
    // Direct term sum_i Delta_i w_ov_ij g'(b_j).
    auto direct = [&](std::size_t t, Vector& out) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += out_delta(t, i) * net.w_ov(i, j);
            out[j] = s * gp(t, j);
        }
    };
    // Recursion term sum_i delta_i w_vv_ij g'(b_j) at time t.
    auto back = [&](std::size_t t, const Vector& later, Vector& out) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += later[i] * net.w_vv(i, j);
            out[j] = s * gp(t, j);
        }
    };

    Vector cur(n), tmp(n);
    if (depth == 0 || depth >= t_max) {
        Vector later(n, 0.0);
        for (std::size_t t = t_max; t-- > 0;) {
            direct(t, cur);
            if (t + 1 < t_max) {
                back(t, later, tmp);
                for (std::size_t j = 0; j < n; ++j) cur[j] += tmp[j];
            }
            std::copy(cur.begin(), cur.end(), gr.deltas.row(t).begin());
            later = cur;
        }
    } else {
        // Each output error at time s feeds delta at times s, s-1, ..., s-depth+1.
        for (std::size_t s = 0; s < t_max; ++s) {
            direct(s, cur);
            for (std::size_t j = 0; j < n; ++j) gr.deltas(s, j) += cur[j];
            for (std::size_t step = 1; step < depth && step <= s; ++step) {
                back(s - step, cur, tmp);
                cur.swap(tmp);
                for (std::size_t j = 0; j < n; ++j) gr.deltas(s - step, j) += cur[j];
            }
        }
    }

    for (std::size_t t = 0; t < t_max; ++t) {
        for (std::size_t a = 0; a < n; ++a) {
            const double d = gr.deltas(t, a);
            for (std::size_t b = 0; b < n; ++b) gr.w_vv(a, b) -= d * tr.states(t, b);
            for (std::size_t b = 0; b < k; ++b) gr.w_vx(a, b) -= d * task.inputs(t, b);
            gr.theta_v[a] += d;
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double d = out_delta(t, i);
            for (std::size_t b = 0; b < n; ++b) gr.w_ov(i, b) -= d * tr.states(t + 1, b);
            gr.theta_o[i] += d;
        }
    }
    return gr;
}

}  // namespace

BpttGradients bptt_gradients(const RecurrentNet& net, const SequenceTask& task, std::span<const double> initial_state) {
    return bptt(net, task, 0, initial_state);
}

BpttGradients bptt_truncated(const RecurrentNet& net, const SequenceTask& task, std::size_t tau_trunc,
                             std::span<const double> initial_state) {
    require(tau_trunc >= 1, "bptt_truncated: tau_trunc must be at least 1");
    return bptt(net, task, tau_trunc, initial_state);
}

void apply_gradients(RecurrentNet& net, const BpttGradients& gradients, double eta) {
    Vector p = parameters(net);
    const Vector g = gradients.flatten();
    require(g.size() == p.size(), "apply_gradients: gradient does not match the net");
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= eta * g[i];
    set_parameters(net, p);
}

SequenceTask read_sequence_task(std::istream& in) {
    std::size_t t_max = 0, n_in = 0, n_out = 0;
    if (!(in >> t_max >> n_in >> n_out)) throw Error("sequence task: expected header 'T N_in N_out'");
    SequenceTask task{Matrix(t_max, n_in), Matrix(t_max, n_out)};
    for (std::size_t t = 0; t < t_max; ++t) {
        for (double& x : task.inputs.row(t))
            if (!(in >> x)) throw Error("sequence task: truncated at step " + std::to_string(t + 1));
        for (double& y : task.targets.row(t))
            if (!(in >> y)) throw Error("sequence task: truncated at step " + std::to_string(t + 1));
    }
    task.validate();
    return task;
}

void write_sequence_task(std::ostream& out, const SequenceTask& task) {
    out << task.length() << ' ' << task.inputs.cols() << ' ' << task.targets.cols() << '\n';
    out.precision(17);
    for (std::size_t t = 0; t < task.length(); ++t) {
        const char* sep = "";
        for (double x : task.inputs.row(t)) {
            out << sep << x;
            sep = " ";
        }
        for (double y : task.targets.row(t)) {
            out << sep << y;
            sep = " ";
        }
        out << '\n';
    }
}

SequenceTask load_sequence_task(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return read_sequence_task(in);
}

void save_sequence_task(const std::string& path, const SequenceTask& task) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    write_sequence_task(out, task);
}

}  // namespace neuro::recurrent
