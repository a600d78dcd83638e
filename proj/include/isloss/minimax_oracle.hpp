#pragma once

// Direct solvers for the inner maximisation
//
//     max_w  sum_i L_i w_i   s.t.  KL(w || uniform) <= C,  w in simplex
//
// used to certify that the softmax weights at the matching temperature are its
// solution, plus the bisection that maps a KL budget C to that temperature.

#include <stdexcept>
#include <string>

#include "isloss/loss_core.hpp"

namespace isloss {

/// Admissible KL deviation in nats. Values above log N are clamped for an
/// N-sample problem and reported as the point-mass regime.
class KlBudget {
public:
    explicit KlBudget(double c);
    double value() const { return c_; }
    /// min(c, log n)
    double effective(Eigen::Index n) const;
    bool exceeds_support(Eigen::Index n) const;

private:
    double c_;
};

enum class OracleMethod { grid, projected_ascent, bisection };

/// interior: 0 < C < log N reached at a finite temperature inside the bracket.
/// uniform / point_mass: C sits at (or beyond) an end of the C <-> T map.
enum class Regime { interior, uniform, point_mass };

std::string to_string(OracleMethod m);
std::string to_string(Regime r);

struct OracleSolution {
    WeightVector weights;
    double objective = 0.0;  // sum_i L_i w_i
    double kl = 0.0;         // nats
    OracleMethod method = OracleMethod::grid;
    Regime regime = Regime::interior;
};

struct TemperatureSolution {
    Temperature temperature{1.0};
    Regime regime = Regime::interior;
    double kl = 0.0;  // KL of is_weights at the returned temperature
};

/// Bisection bracket on T and iteration cap.
inline constexpr double kMinTemperature = 1e-6;
inline constexpr double kMaxTemperature = 1e6;
inline constexpr int kBisectionIterations = 200;

/// Raised when projected ascent leaves the KL ball by more than 1e-6.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, OracleSolution last)
        : std::runtime_error(what), last_(std::move(last)) {}
    const OracleSolution& last_iterate() const { return last_; }

private:
    OracleSolution last_;
};

/// Exhaustive search over simplex points with spacing 1/resolution (plus the
/// exact uniform point). Ties go to the lexicographically smallest weights.
/// Throws UnsupportedSize for N > 4 and std::invalid_argument for resolution < 100.
OracleSolution solve_inner_max_grid(const LossVector& losses, KlBudget budget, int resolution);

/// Projected gradient ascent on simplex intersect KL ball. When the KL
/// constraint is active the ascent direction drops its component along the
/// KL gradient; feasibility is restored by radial interpolation toward uniform.
OracleSolution solve_inner_max_ascent(const LossVector& losses, KlBudget budget, double step,
                                      int iters);

/// T with empirical_kl(is_weights(L, T)) == C, by bisection on log T over
/// [kMinTemperature, kMaxTemperature]. Outside the bracket the regime flag is
/// set and the bracket end is returned. Constant losses with C > 0 throw
/// DegenerateInput.
TemperatureSolution temperature_for_budget(const LossVector& losses, KlBudget budget);

/// Softmax weights at temperature_for_budget(L, C); exact uniform in the
/// uniform regime.
OracleSolution solve_inner_max_closed_form(const LossVector& losses, KlBudget budget);

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace isloss
