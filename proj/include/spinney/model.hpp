#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spinney/errors.hpp"
#include "spinney/rng.hpp"

namespace spinney {

using StateIndex = std::int32_t;

// A set of states, kept sorted and duplicate-free.
using StateSet = std::vector<StateIndex>;

class Model;

StateSet normalize_state_set(const Model& model, StateSet b);

// A nonnegative vector indexed like the model's state list.
struct Measure {
    Eigen::VectorXd values;

    double total() const { return values.sum(); }
    double operator[](StateIndex x) const { return values[x]; }
};

// Offspring count distribution with finite support.
class OffspringLaw {
public:
    // entries: (count, probability); counts distinct and >= 0, probabilities
    // nonnegative and summing to 1 within 1e-12.
    static OffspringLaw from_entries(std::vector<std::pair<int, double>> entries);

    double mean() const { return mean_; }
    int max_count() const { return entries_.empty() ? 0 : entries_.back().first; }
    double prob(int count) const;
    const std::vector<std::pair<int, double>>& entries() const { return entries_; }

    // Law reweighted by the count: n d(n) / m. Drops the zero class.
    OffspringLaw size_biased() const;

    int sample(Rng& rng) const { return entries_[cdf_.sample(rng)].first; }

private:
    std::vector<std::pair<int, double>> entries_; // sorted by count
    CdfSampler cdf_;
    double mean_ = 0.0;
};

// Branching Markov chain model: finite state list, stochastic motion kernel,
// per-state offspring law. The intensity operator, spectral radius and Green's
// function are computed lazily and cached; models are immutable after build,
// so the caches are thread-safe.
class Model {
public:
    static Model build(std::vector<std::string> states,
                       Eigen::MatrixXd motion,
                       std::vector<OffspringLaw> offspring);

    int size() const { return static_cast<int>(states_.size()); }
    const std::vector<std::string>& states() const { return states_; }
    const std::string& name_of(StateIndex x) const;
    StateIndex index_of(const std::string& name) const;

    const Eigen::MatrixXd& motion() const { return motion_; }
    const OffspringLaw& offspring(StateIndex x) const;
    double mean_offspring(StateIndex x) const { return means_[x]; }
    const Eigen::VectorXd& mean_offspring() const { return means_; }
    bool sub_markovian(double tol = 1e-12) const;

    // Q(x,y) = m_x p(x,y)
    const Eigen::MatrixXd& intensity() const { return intensity_; }

    // Spectral radius of Q by power iteration on (Q+I)/2; see model.cpp.
    double spectral_radius() const;

    // G = sum_n Q^n, solved from (I-Q)G = I. Throws DivergentGreen when the
    // spectral radius is not below 1 - 1e-9, SolveFailure on a bad solve.
    const Eigen::MatrixXd& green(double tol = 1e-10) const;

    StateIndex sample_motion(StateIndex x, Rng& rng) const;
    int sample_offspring(StateIndex x, Rng& rng) const {
        return offspring_[x].sample(rng);
    }

    // Default norming region taken from the model file; may be empty.
    const StateSet& default_b() const { return default_b_; }
    void set_default_b(StateSet b) { default_b_ = normalize_state_set(*this, std::move(b)); }

private:
    Model() = default;

    std::vector<std::string> states_;
    std::unordered_map<std::string, StateIndex> index_;
    Eigen::MatrixXd motion_;
    std::vector<OffspringLaw> offspring_;
    Eigen::VectorXd means_;
    Eigen::MatrixXd intensity_;
    std::vector<CdfSampler> motion_cdf_;
    StateSet default_b_;

    struct Lazy {
        std::mutex mu;
        std::optional<double> rho;
        std::optional<Eigen::MatrixXd> green;
    };
    std::shared_ptr<Lazy> lazy_ = std::make_shared<Lazy>();
};

// Operation-style wrappers around the model accessors.
Model build_model(std::vector<std::string> states,
                  Eigen::MatrixXd motion,
                  std::vector<OffspringLaw> offspring);
Eigen::MatrixXd intensity_operator(const Model& model);
Eigen::MatrixXd green_function(const Model& model, double tol = 1e-10);
OffspringLaw size_biased_law(const OffspringLaw& law);

// Indicator mask of B over the model's states.
std::vector<char> state_mask(const Model& model, const StateSet& b);

// Spectral radius of a nonnegative matrix (Collatz-Wielandt upper bound by
// power iteration); the gate used before solving (I - M) systems.
double power_iteration_radius(const Eigen::MatrixXd& q);

// Expected number of B-entrance individuals from one ancestor at each state:
// equal to 1 on B, harmonic for Q off B. Requires a finite Green's function
// and G(x, B) > 0 for every x (else NotNormingRegion).
Measure h_function(const Model& model, const StateSet& b);

// p_h(x,y) = 1_{B^c}(x) Q(x,y) h(y) / h(x). Rows vanish on B; rows off B sum
// to 1 when h comes from h_function.
Eigen::MatrixXd h_transform_kernel(const Model& model, const StateSet& b);
Eigen::MatrixXd h_transform_kernel(const Model& model, const StateSet& b,
                                   const Measure& h);

} // namespace spinney
