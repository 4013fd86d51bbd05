#include "spinney/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace spinney {

namespace {

constexpr double kProbTol = 1e-12;
constexpr double kCriticalGap = 1e-9; // green() demands rho < 1 - kCriticalGap
constexpr int kPowerIterations = 10000;

} // namespace

// Spectral radius of a nonnegative matrix. Power iteration runs on
// M = (Q+I)/2: the strictly positive diagonal makes every irreducible block
// aperiodic, so the iterate stays strictly positive and the Collatz-Wielandt
// upper bound max_i (Mx)_i/x_i decreases to rho(M) instead of oscillating.
// The upper bound is used for the gate (valid for any nonnegative matrix,
// including reducible ones where the lower bound can stall on a dominated
// block). rho(Q) = 2 rho(M) - 1 because shifting a nonnegative matrix by I
// shifts its Perron root by 1.
double power_iteration_radius(const Eigen::MatrixXd& q) {
    const Eigen::Index n = q.rows();
    const Eigen::MatrixXd m = 0.5 * (q + Eigen::MatrixXd::Identity(n, n));
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    double hi = std::numeric_limits<double>::infinity();
    for (int it = 0; it < kPowerIterations; ++it) {
        const Eigen::VectorXd y = m * x;
        const Eigen::ArrayXd ratio = y.array() / x.array();
        const double hi_next = ratio.maxCoeff();
        const double lo = ratio.minCoeff();
        x = y / y.sum();
        const bool settled = it > 0 && (hi - hi_next < 1e-14 || hi_next - lo < 1e-13);
        hi = hi_next;
        if (settled) break;
    }
    return std::max(0.0, 2.0 * hi - 1.0);
}

OffspringLaw OffspringLaw::from_entries(std::vector<std::pair<int, double>> entries) {
    if (entries.empty()) throw MissingOffspringLaw("offspring law has no entries");
    std::sort(entries.begin(), entries.end());
    double total = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& [count, p] = entries[i];
        if (count < 0) throw RowSumViolation("negative offspring count");
        if (p < 0.0) throw RowSumViolation("negative offspring probability");
        if (i > 0 && entries[i - 1].first == count)
            throw RowSumViolation("duplicate offspring count");
        total += p;
        mean += count * p;
    }
    if (std::abs(total - 1.0) > kProbTol) {
        std::ostringstream os;
        os << "offspring probabilities sum to " << total;
        throw RowSumViolation(os.str());
    }
    OffspringLaw law;
    std::vector<double> weights;
    weights.reserve(entries.size());
    for (const auto& [count, p] : entries) weights.push_back(p);
    law.entries_ = std::move(entries);
    law.cdf_ = CdfSampler(weights);
    law.mean_ = mean;
    return law;
}

double OffspringLaw::prob(int count) const {
    for (const auto& [c, p] : entries_)
        if (c == count) return p;
    return 0.0;
}

OffspringLaw OffspringLaw::size_biased() const {
    if (mean_ <= 0.0)
        throw ZeroMeanOffspring("size-biased law undefined for mean-zero offspring");
    std::vector<std::pair<int, double>> biased;
    for (const auto& [count, p] : entries_)
        if (count > 0) biased.emplace_back(count, count * p / mean_);
    return from_entries(std::move(biased));
}

Model Model::build(std::vector<std::string> states,
                   Eigen::MatrixXd motion,
                   std::vector<OffspringLaw> offspring) {
    if (states.empty()) throw EmptyStateSpace("model needs at least one state");
    const int n = static_cast<int>(states.size());
    if (motion.rows() != n || motion.cols() != n)
        throw DimensionMismatch("motion kernel shape does not match the state list");
    if (static_cast<int>(offspring.size()) != n)
        throw MissingOffspringLaw("one offspring law per state is required");

    Model model;
    model.index_.reserve(states.size());
    for (int i = 0; i < n; ++i) {
        auto [it, fresh] = model.index_.emplace(states[i], i);
        (void)it;
        if (!fresh) throw ParseError("duplicate state identifier: " + states[i]);
    }

    for (int x = 0; x < n; ++x) {
        double row = 0.0;
        for (int y = 0; y < n; ++y) {
            const double p = motion(x, y);
            if (p < 0.0) throw RowSumViolation("negative motion probability");
            row += p;
        }
        if (std::abs(row - 1.0) > kProbTol) {
            std::ostringstream os;
            os << "motion row for state " << states[x] << " sums to " << row;
            throw RowSumViolation(os.str());
        }
    }

    model.states_ = std::move(states);
    model.motion_ = std::move(motion);
    model.offspring_ = std::move(offspring);
    model.means_.resize(n);
    for (int x = 0; x < n; ++x) model.means_[x] = model.offspring_[x].mean();
    model.intensity_ = model.means_.asDiagonal() * model.motion_;
    model.motion_cdf_.reserve(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) {
        std::vector<double> w(static_cast<std::size_t>(n));
        for (int y = 0; y < n; ++y) w[static_cast<std::size_t>(y)] = model.motion_(x, y);
        model.motion_cdf_.emplace_back(w);
    }
    return model;
}

const std::string& Model::name_of(StateIndex x) const {
    if (x < 0 || x >= size()) throw UnknownState("state index out of range");
    return states_[static_cast<std::size_t>(x)];
}

StateIndex Model::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UnknownState(name);
    return it->second;
}

const OffspringLaw& Model::offspring(StateIndex x) const {
    if (x < 0 || x >= size()) throw UnknownState("state index out of range");
    return offspring_[static_cast<std::size_t>(x)];
}

bool Model::sub_markovian(double tol) const {
    return (means_.array() <= 1.0 + tol).all();
}

double Model::spectral_radius() const {
    std::lock_guard<std::mutex> lock(lazy_->mu);
    if (!lazy_->rho) lazy_->rho = power_iteration_radius(intensity_);
    return *lazy_->rho;
}

const Eigen::MatrixXd& Model::green(double tol) const {
    const double rho = spectral_radius();
    if (rho >= 1.0 - kCriticalGap) {
        std::ostringstream os;
        os << "spectral radius " << rho << " is not below 1";
        throw DivergentGreen(os.str());
    }
    std::lock_guard<std::mutex> lock(lazy_->mu);
    if (!lazy_->green) {
        const Eigen::Index n = intensity_.rows();
        const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - intensity_;
        Eigen::MatrixXd g = a.partialPivLu().solve(Eigen::MatrixXd::Identity(n, n));
        const double residual = (a * g - Eigen::MatrixXd::Identity(n, n))
                                    .cwiseAbs()
                                    .maxCoeff();
        if (!(residual <= tol)) {
            std::ostringstream os;
            os << "Green's function residual " << residual << " exceeds " << tol;
            throw SolveFailure(os.str());
        }
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                if (g(i, j) < -kProbTol)
                    throw SolveFailure("negative entry in the Green's function");
                if (g(i, j) < 0.0) g(i, j) = 0.0;
            }
        lazy_->green = std::move(g);
    }
    return *lazy_->green;
}

StateIndex Model::sample_motion(StateIndex x, Rng& rng) const {
    return static_cast<StateIndex>(motion_cdf_[static_cast<std::size_t>(x)].sample(rng));
}

StateSet normalize_state_set(const Model& model, StateSet b) {
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    for (StateIndex x : b)
        if (x < 0 || x >= model.size())
            throw UnknownState("state index out of range in state set");
    return b;
}

std::vector<char> state_mask(const Model& model, const StateSet& b) {
    std::vector<char> mask(static_cast<std::size_t>(model.size()), 0);
    for (StateIndex x : b) {
        if (x < 0 || x >= model.size())
            throw UnknownState("state index out of range in state set");
        mask[static_cast<std::size_t>(x)] = 1;
    }
    return mask;
}

Model build_model(std::vector<std::string> states,
                  Eigen::MatrixXd motion,
                  std::vector<OffspringLaw> offspring) {
    return Model::build(std::move(states), std::move(motion), std::move(offspring));
}

Eigen::MatrixXd intensity_operator(const Model& model) { return model.intensity(); }

Eigen::MatrixXd green_function(const Model& model, double tol) {
    return model.green(tol);
}

OffspringLaw size_biased_law(const OffspringLaw& law) { return law.size_biased(); }

Measure h_function(const Model& model, const StateSet& b_in) {
    const StateSet b = normalize_state_set(model, b_in);
    if (b.empty()) throw NotNormingRegion("empty norming region");
    const int n = model.size();
    const auto mask = state_mask(model, b);

    // Norming means G(x, B) > 0 everywhere, which is a statement about the
    // support of Q^n: check it on the graph instead of through green(), so
    // h stays available for critical models whose taboo part is subcritical.
    const Eigen::MatrixXd& q = model.intensity();
    std::vector<char> reaches(static_cast<std::size_t>(n), 0);
    for (StateIndex y : b) reaches[static_cast<std::size_t>(y)] = 1;
    for (bool grew = true; grew;) {
        grew = false;
        for (int x = 0; x < n; ++x) {
            if (reaches[static_cast<std::size_t>(x)]) continue;
            for (int y = 0; y < n; ++y) {
                if (q(x, y) > kProbTol && reaches[static_cast<std::size_t>(y)]) {
                    reaches[static_cast<std::size_t>(x)] = 1;
                    grew = true;
                    break;
                }
            }
        }
    }
    for (int x = 0; x < n; ++x)
        if (!reaches[static_cast<std::size_t>(x)])
            throw NotNormingRegion("state " + model.name_of(x) +
                                   " never reaches the region");

    // h = 1 on B; off B solve (I - Q|_{cc}) h_c = Q|_{cB} 1.
    std::vector<int> comp;
    for (int x = 0; x < n; ++x)
        if (!mask[static_cast<std::size_t>(x)]) comp.push_back(x);
    Measure h;
    h.values = Eigen::VectorXd::Ones(n);
    if (!comp.empty()) {
        const int k = static_cast<int>(comp.size());
        Eigen::MatrixXd qcc(k, k);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) qcc(i, j) = q(comp[i], comp[j]);
            for (StateIndex y : b) rhs[i] += q(comp[i], y);
        }
        if (power_iteration_radius(qcc) >= 1.0 - kCriticalGap)
            throw NotNormingRegion("expected entrance count diverges off the region");
        const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(k, k) - qcc;
        Eigen::VectorXd hc = a.partialPivLu().solve(rhs);
        const double residual = (a * hc - rhs).cwiseAbs().maxCoeff();
        if (!(residual <= 1e-10)) throw SolveFailure("h-function solve residual too large");
        for (int i = 0; i < k; ++i) {
            if (hc[i] <= 0.0) throw NotNormingRegion("h vanishes off the region");
            h.values[comp[i]] = hc[i];
        }
    }
    return h;
}

Eigen::MatrixXd h_transform_kernel(const Model& model, const StateSet& b) {
    return h_transform_kernel(model, b, h_function(model, b));
}

Eigen::MatrixXd h_transform_kernel(const Model& model, const StateSet& b_in,
                                   const Measure& h) {
    const StateSet b = normalize_state_set(model, b_in);
    const int n = model.size();
    if (h.values.size() != n) throw DimensionMismatch("h vector size mismatch");
    const auto mask = state_mask(model, b);
    const Eigen::MatrixXd& q = model.intensity();
    Eigen::MatrixXd ph = Eigen::MatrixXd::Zero(n, n);
    for (int x = 0; x < n; ++x) {
        if (mask[static_cast<std::size_t>(x)]) continue;
        if (h.values[x] <= 0.0) throw NotNormingRegion("h vanishes off the region");
        for (int y = 0; y < n; ++y) ph(x, y) = q(x, y) * h.values[y] / h.values[x];
    }
    return ph;
}

} // namespace spinney
