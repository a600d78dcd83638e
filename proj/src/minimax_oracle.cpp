#include "isloss/minimax_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace isloss {

namespace {

constexpr double kFeasibilitySlack = 1e-12;

void require_losses(const LossVector& losses) {
    if (losses.size() == 0) throw DomainError("loss vector is empty");
    if (!losses.allFinite()) throw DomainError("loss vector contains non-finite values");
}

Eigen::VectorXd uniform(Eigen::Index n) {
    return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

// sum w log w + log N without the simplex check (iterates drift by ~1e-16).
double kl_to_uniform(const Eigen::VectorXd& w) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w(i) > 0.0) acc += w(i) * std::log(w(i));
    return std::max(0.0, acc + std::log(static_cast<double>(w.size())));
}

bool is_constant(const LossVector& losses) {
    return losses.maxCoeff() == losses.minCoeff();
}

Regime regime_of(const KlBudget& budget, Eigen::Index n) {
    if (budget.exceeds_support(n)) return Regime::point_mass;
    if (budget.value() == 0.0) return Regime::uniform;
    return Regime::interior;
}

// Smallest alpha in [0,1] with KL((1-alpha) w + alpha u) <= c. KL is convex
// along the segment and vanishes at alpha = 1, so it is non-increasing there.
Eigen::VectorXd retract_toward_uniform(const Eigen::VectorXd& w, double c) {
    const Eigen::VectorXd u = uniform(w.size());
    if (c <= 0.0) return u;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (kl_to_uniform((1.0 - mid) * w + mid * u) > c)
            lo = mid;
        else
            hi = mid;
    }
    return (1.0 - hi) * w + hi * u;
}

bool lexicographically_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace

KlBudget::KlBudget(double c) : c_(c) {
    if (!std::isfinite(c) || c < 0.0) throw DomainError("KL budget must be finite and non-negative");
}

double KlBudget::effective(Eigen::Index n) const {
    return std::min(c_, std::log(static_cast<double>(n)));
}

bool KlBudget::exceeds_support(Eigen::Index n) const {
    return c_ >= std::log(static_cast<double>(n));
}

std::string to_string(OracleMethod m) {
    switch (m) {
        case OracleMethod::grid: return "grid";
        case OracleMethod::projected_ascent: return "projected-ascent";
        case OracleMethod::bisection: return "bisection";
    }
    return "unknown";
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::interior: return "interior";
        case Regime::uniform: return "uniform";
        case Regime::point_mass: return "point-mass";
    }
    return "unknown";
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    std::vector<double> sorted(v.data(), v.data() + v.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cumulative += sorted[k];
        const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
        if (sorted[k] - candidate > 0.0) theta = candidate;
    }
    return (v.array() - theta).max(0.0).matrix();
}

OracleSolution solve_inner_max_grid(const LossVector& losses, KlBudget budget, int resolution) {
    require_losses(losses);
    const Eigen::Index n = losses.size();
    if (n > 4) throw UnsupportedSize("grid oracle supports at most 4 samples");
    if (resolution < 100) throw std::invalid_argument("grid resolution must be at least 100");

    const double c = budget.effective(n);
    const double log_n = std::log(static_cast<double>(n));
    const double inv_res = 1.0 / resolution;

    // x log x at every grid coordinate k / resolution.
    std::vector<double> xlogx(static_cast<std::size_t>(resolution) + 1, 0.0);
    for (int k = 1; k <= resolution; ++k) {
        const double x = k * inv_res;
        xlogx[static_cast<std::size_t>(k)] = x * std::log(x);
    }

    std::vector<int> counts(static_cast<std::size_t>(n), 0);
    std::vector<int> best_counts;
    double best_objective = -std::numeric_limits<double>::infinity();

    // Lexicographic enumeration; strict improvement keeps the smallest maximiser.
    std::function<void(Eigen::Index, int, double, double)> visit =
        [&](Eigen::Index dim, int remaining, double entropy, double objective) {
            if (dim == n - 1) {
                counts[static_cast<std::size_t>(dim)] = remaining;
                const double kl = entropy + xlogx[static_cast<std::size_t>(remaining)] + log_n;
                if (kl > c + kFeasibilitySlack) return;
                const double total = objective + losses(dim) * remaining;
                if (total * inv_res > best_objective) {
                    best_objective = total * inv_res;
                    best_counts = counts;
                }
                return;
            }
            for (int k = 0; k <= remaining; ++k) {
                counts[static_cast<std::size_t>(dim)] = k;
                visit(dim + 1, remaining - k, entropy + xlogx[static_cast<std::size_t>(k)],
                      objective + losses(dim) * k);
            }
        };
    visit(0, resolution, 0.0, 0.0);

    OracleSolution sol;
    sol.method = OracleMethod::grid;
    sol.regime = regime_of(budget, n);

    // The exact uniform point is feasible for every budget even when
    // resolution is not a multiple of N.
    const Eigen::VectorXd u = uniform(n);
    const double uniform_objective = losses.mean();
    Eigen::VectorXd grid_best;
    if (!best_counts.empty()) {
        grid_best.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            grid_best(i) = best_counts[static_cast<std::size_t>(i)] * inv_res;
    }
    if (best_counts.empty() || uniform_objective > best_objective ||
        (uniform_objective == best_objective && lexicographically_less(u, grid_best))) {
        sol.weights = u;
        sol.objective = uniform_objective;
    } else {
        sol.weights = grid_best;
        sol.objective = best_objective;
    }
    sol.kl = kl_to_uniform(sol.weights);
    return sol;
}

OracleSolution solve_inner_max_ascent(const LossVector& losses, KlBudget budget, double step,
                                      int iters) {
    require_losses(losses);
    if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("ascent step must be positive");
    if (iters < 1) throw std::invalid_argument("ascent needs at least one iteration");

    const Eigen::Index n = losses.size();
    const double c = budget.effective(n);
    const bool ball_binds = !budget.exceeds_support(n);
    const Eigen::VectorXd centred = (losses.array() - losses.mean()).matrix();

    Eigen::VectorXd w = uniform(n);
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd direction = centred;
        if (ball_binds && (w.array() > 0.0).all() && kl_to_uniform(w) >= c - 1e-9) {
            // Outward normal of the KL ball within the simplex tangent space.
            Eigen::VectorXd normal = w.array().log().matrix();
            normal.array() -= normal.mean();
            const double nn = normal.squaredNorm();
            const double gn = direction.dot(normal);
            if (nn > 0.0 && gn > 0.0) direction -= (gn / nn) * normal;
        }
        w = project_to_simplex(w + step * direction);
        if (ball_binds && kl_to_uniform(w) > c) w = retract_toward_uniform(w, c);
    }

    OracleSolution sol;
    sol.method = OracleMethod::projected_ascent;
    sol.regime = regime_of(budget, n);
    sol.weights = w;
    sol.objective = losses.dot(w);
    sol.kl = kl_to_uniform(w);
    if (sol.kl > c + 1e-6 || std::abs(w.sum() - 1.0) > 1e-6)
        throw ConvergenceError("projected ascent finished outside the feasible set", sol);
    return sol;
}

TemperatureSolution temperature_for_budget(const LossVector& losses, KlBudget budget) {
    require_losses(losses);
    const Eigen::Index n = losses.size();
    const double c = budget.value();

    auto kl_at = [&](double t) { return kl_to_uniform(is_weights(losses, Temperature(t))); };

    if (is_constant(losses)) {
        if (c > 0.0)
            throw DegenerateInput("constant losses: no finite temperature attains a positive KL budget");
        return {Temperature(kMaxTemperature), Regime::uniform, 0.0};
    }

    const double kl_hot = kl_at(kMaxTemperature);
    if (c <= kl_hot) return {Temperature(kMaxTemperature), Regime::uniform, kl_hot};
    const double kl_cold = kl_at(kMinTemperature);
    if (budget.exceeds_support(n) || c >= kl_cold)
        return {Temperature(kMinTemperature), Regime::point_mass, kl_cold};

    // KL is non-increasing in T; bisect on log T.
    double lo = std::log(kMinTemperature), hi = std::log(kMaxTemperature);
    double kl_lo = kl_cold, kl_hi = kl_hot;
    for (int it = 0; it < kBisectionIterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double kl_mid = kl_at(std::exp(mid));
        if (kl_mid > c) {
            lo = mid;
            kl_lo = kl_mid;
        } else {
            hi = mid;
            kl_hi = kl_mid;
        }
        if (kl_lo == c || kl_hi == c) break;
    }
    if (std::abs(kl_lo - c) < std::abs(kl_hi - c)) return {Temperature(std::exp(lo)), Regime::interior, kl_lo};
    return {Temperature(std::exp(hi)), Regime::interior, kl_hi};
}

OracleSolution solve_inner_max_closed_form(const LossVector& losses, KlBudget budget) {
    require_losses(losses);
    OracleSolution sol;
    sol.method = OracleMethod::bisection;
    if (budget.value() == 0.0 || (is_constant(losses) && !budget.exceeds_support(losses.size()))) {
        sol.weights = uniform(losses.size());
        sol.regime = Regime::uniform;
    } else if (is_constant(losses)) {
        sol.weights = uniform(losses.size());
        sol.regime = Regime::point_mass;
    } else {
        const TemperatureSolution ts = temperature_for_budget(losses, budget);
        sol.regime = ts.regime;
        sol.weights = ts.regime == Regime::uniform ? uniform(losses.size())
                                                   : is_weights(losses, ts.temperature);
    }
    sol.objective = losses.dot(sol.weights);
    sol.kl = kl_to_uniform(sol.weights);
    return sol;
}

}  // namespace isloss
