#include "smjls/expectation.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <stdexcept>

#include "smjls/errors.hpp"

namespace smjls {

GaussLegendreRule::GaussLegendreRule(int order) {
    if (order < 2) throw std::invalid_argument("Gauss-Legendre order must be >= 2");
    nodes.resize(static_cast<std::size_t>(order));
    weights.resize(static_cast<std::size_t>(order));
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (order + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < order; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = order * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        nodes[static_cast<std::size_t>(i)] = -z;
        nodes[static_cast<std::size_t>(order - 1 - i)] = z;
        const double w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(order - 1 - i)] = w;
    }
}

namespace {

// closed form for the 2x2 case: exp(M) = e^mu (cosh(s) I + sinh(s)/s (M - mu I))
// with mu = tr(M)/2 and s^2 = mu^2 - det(M); the s^2 < 0 branch uses cos/sin
Eigen::Matrix2d exp_2x2(const Eigen::Matrix2d& M) {
    const double mu = 0.5 * (M(0, 0) + M(1, 1));
    const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    const double s2 = mu * mu - det;
    double c, k; // cosh(s), sinh(s)/s and trigonometric counterparts
    if (s2 > 1e-24) {
        const double s = std::sqrt(s2);
        c = std::cosh(s);
        k = std::sinh(s) / s;
    } else if (s2 < -1e-24) {
        const double s = std::sqrt(-s2);
        c = std::cos(s);
        k = std::sin(s) / s;
    } else {
        c = 1.0 + 0.5 * s2;
        k = 1.0 + s2 / 6.0;
    }
    const double scale = std::exp(mu);
    Eigen::Matrix2d E;
    E(0, 0) = scale * (c + k * (M(0, 0) - mu));
    E(0, 1) = scale * k * M(0, 1);
    E(1, 0) = scale * k * M(1, 0);
    E(1, 1) = scale * (c + k * (M(1, 1) - mu));
    return E;
}

} // namespace

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A, double t) {
    if (A.rows() != A.cols()) throw std::invalid_argument("matrix_exponential: matrix must be square");
    if (!A.allFinite() || !std::isfinite(t)) throw NumericalError("matrix_exponential: non-finite input");
    Eigen::MatrixXd E;
    if (A.rows() == 1)
        E = Eigen::MatrixXd::Constant(1, 1, std::exp(A(0, 0) * t));
    else if (A.rows() == 2)
        E = exp_2x2(A * t);
    else
        E = (A * t).exp();
    if (!E.allFinite()) throw NumericalError("matrix_exponential: non-finite result");
    if (t >= 0.0 && is_metzler(A)) {
        for (Eigen::Index i = 0; i < E.rows(); ++i) {
            for (Eigen::Index j = 0; j < E.cols(); ++j) {
                if (E(i, j) < 0.0) {
                    if (E(i, j) < -1e-13)
                        throw NumericalError("matrix_exponential: Metzler input produced a negative entry");
                    E(i, j) = 0.0;
                }
            }
        }
    }
    return E;
}

namespace {

struct Panel {
    double lo;
    double hi;
};

// single Gauss-Legendre panel over [lo, hi] into out (overwritten)
void gl_panel(const std::function<void(double, Eigen::MatrixXd&)>& f, const GaussLegendreRule& rule,
              double lo, double hi, Eigen::MatrixXd& out, Eigen::MatrixXd& scratch) {
    const double mid = 0.5 * (lo + hi);
    const double halfwidth = 0.5 * (hi - lo);
    out.setZero();
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        f(mid + halfwidth * rule.nodes[k], scratch);
        out += (halfwidth * rule.weights[k]) * scratch;
    }
}

} // namespace

Eigen::MatrixXd integrate_matrix(const std::function<void(double, Eigen::MatrixXd&)>& f, int rows,
                                 int cols, double lo, double hi, const QuadratureConfig& cfg,
                                 double* error_bound) {
    if (!(hi > lo)) throw std::invalid_argument("integrate_matrix: empty interval");
    if (!(cfg.abs_tol > 0.0) || !(cfg.rel_tol > 0.0) || cfg.max_subdivisions < 1)
        throw std::invalid_argument("integrate_matrix: tolerances must be positive");
    const GaussLegendreRule rule(cfg.rule_order);
    Eigen::MatrixXd scratch(rows, cols), coarse(rows, cols), left(rows, cols), right(rows, cols);

    // one coarse pass fixes the scale used by the relative tolerance
    gl_panel(f, rule, lo, hi, coarse, scratch);
    const double scale = coarse.cwiseAbs().maxCoeff();
    const double budget = std::max(cfg.abs_tol, cfg.rel_tol * scale);
    const double total_len = hi - lo;

    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(rows, cols);
    double acc_err = 0.0;
    int panels_used = 0;
    bool exhausted = false;

    struct Item {
        Panel panel;
        Eigen::MatrixXd estimate;
    };
    std::vector<Item> stack;
    stack.push_back({{lo, hi}, coarse});

    while (!stack.empty()) {
        Item item = std::move(stack.back());
        stack.pop_back();
        const double mid = 0.5 * (item.panel.lo + item.panel.hi);
        if (panels_used + 2 > cfg.max_subdivisions || !(mid > item.panel.lo && mid < item.panel.hi)) {
            // out of budget (or interval at roundoff limit): keep coarse value
            acc += item.estimate;
            acc_err += budget; // unknown true error; count a full budget share
            exhausted = exhausted || panels_used + 2 > cfg.max_subdivisions;
            continue;
        }
        gl_panel(f, rule, item.panel.lo, mid, left, scratch);
        gl_panel(f, rule, mid, item.panel.hi, right, scratch);
        panels_used += 2;
        const double err = (left + right - item.estimate).cwiseAbs().maxCoeff();
        const double local_budget = budget * (item.panel.hi - item.panel.lo) / total_len;
        if (err <= local_budget) {
            acc += left + right;
            acc_err += err;
        } else {
            stack.push_back({{item.panel.lo, mid}, left});
            stack.push_back({{mid, item.panel.hi}, right});
        }
    }

    if (exhausted) {
        throw AccuracyError("integration did not reach tolerance within " +
                                std::to_string(cfg.max_subdivisions) + " panels",
                            acc, acc_err);
    }
    if (error_bound != nullptr) *error_bound = acc_err;
    return acc;
}

namespace {

// shared by the adaptive path and the brute-force oracle: the expectation of
// the lifted flow over the dwell law, left-multiplied by the lifted jump mean
struct TransitionIntegrand {
    const Eigen::MatrixXd& A;
    const PowerLifter& lifter;

    void operator()(double h, Eigen::MatrixXd& out) const {
        lifter.apply(matrix_exponential(A, h), out);
    }
};

} // namespace

Eigen::MatrixXd expected_lifted_transition(const SemiMarkovModel& model, int to_mode, int from_mode,
                                           int m, const QuadratureConfig& cfg) {
    if (from_mode < 0 || from_mode >= model.mode_count() || to_mode < 0 || to_mode >= model.mode_count())
        throw std::invalid_argument("expected_lifted_transition: mode index out of range");
    const MultiIndexBasis basis(model.state_dim(), m);
    const PowerLifter lifter(basis);
    const int nm = basis.size();
    const DwellLaw& law = model.dwell(from_mode, to_mode);
    const JumpMixture& jump = model.jump(from_mode, to_mode);
    const Eigen::MatrixXd& A = model.mode(from_mode);
    const TransitionIntegrand integrand{A, lifter};

    const bool trivial_jump = jump.is_identity();
    Eigen::MatrixXd jump_lift;
    double jump_gain = 1.0;
    if (!trivial_jump) {
        jump_lift = jump.lifted_mean(basis);
        jump_gain = std::max(1.0, jump_lift.cwiseAbs().rowwise().sum().maxCoeff());
    }

    QuadratureConfig scaled = cfg;
    scaled.abs_tol = cfg.abs_tol / jump_gain;
    scaled.rel_tol = cfg.rel_tol / jump_gain;

    Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(nm, nm);
    for (const Interval& iv : law.continuous_intervals()) {
        auto weighted = [&](double h, Eigen::MatrixXd& out) {
            integrand(h, out);
            out *= law.density(h);
        };
        raw += integrate_matrix(weighted, nm, nm, iv.lo, iv.hi, scaled);
    }
    Eigen::MatrixXd at_atom(nm, nm);
    for (const Atom& atom : law.atoms()) {
        integrand(atom.time, at_atom);
        raw += atom.mass * at_atom;
    }
    return trivial_jump ? raw : Eigen::MatrixXd(jump_lift * raw);
}

Eigen::MatrixXd brute_force_expectation(const SemiMarkovModel& model, int to_mode, int from_mode,
                                        int m, int grid_points) {
    if (grid_points < 10) throw std::invalid_argument("brute_force_expectation: grid_points >= 10 required");
    const MultiIndexBasis basis(model.state_dim(), m);
    const PowerLifter lifter(basis);
    const int nm = basis.size();
    const DwellLaw& law = model.dwell(from_mode, to_mode);
    const JumpMixture& jump = model.jump(from_mode, to_mode);
    const TransitionIntegrand integrand{model.mode(from_mode), lifter};

    Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(nm, nm);
    Eigen::MatrixXd value(nm, nm);
    for (const Interval& iv : law.continuous_intervals()) {
        const double step = (iv.hi - iv.lo) / grid_points;
        for (int k = 0; k < grid_points; ++k) {
            const double h = iv.lo + (k + 0.5) * step;
            integrand(h, value);
            raw += (law.density(h) * step) * value;
        }
    }
    for (const Atom& atom : law.atoms()) {
        integrand(atom.time, value);
        raw += atom.mass * value;
    }
    return jump.is_identity() ? raw : Eigen::MatrixXd(jump.lifted_mean(basis) * raw);
}

} // namespace smjls
