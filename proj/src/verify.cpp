#include "spinney/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <tuple>
#include <utility>

#include "spinney/errors.hpp"
#include "spinney/rng.hpp"

namespace spinney {
namespace {

long location_prefix(const std::string& enc) {
    return std::strtol(enc.c_str(), nullptr, 10);
}

// Canonical child order: by (location, encoding). Locations can run past one
// digit, so plain string order is not enough.
struct EncLess {
    bool operator()(const std::string& a, const std::string& b) const {
        const long la = location_prefix(a);
        const long lb = location_prefix(b);
        if (la != lb) return la < lb;
        return a < b;
    }
};

using Law = std::map<std::string, double, EncLess>;

std::string leaf_encoding(StateIndex x, char colour) {
    std::string out = std::to_string(x);
    out += ':';
    out += colour;
    out += "()";
    return out;
}

std::string wrap(StateIndex x, char colour, const std::string& children) {
    std::string out = std::to_string(x);
    out += ':';
    out += colour;
    out += '(';
    out += children;
    out += ')';
    return out;
}

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Exact truncated-tree laws by memoized recursion over (mode, state, depth).
// kPlain/kWhite are uncoloured/white plain subtrees; kBlue is the size-biased
// subtree below a blue vertex; kReweighted is the unnormalized entrance-count
// weighted law (a subtree at x carries total mass h(x): each tree shape is
// weighted by the expected number of entrance continuations consistent with
// its blue line).
class Enumerator {
public:
    enum Mode : int { kPlain, kWhite, kBlue, kReweighted };

    // Plain enumeration; coloured modes unavailable.
    Enumerator(const Model& model, std::int64_t budget)
        : model_(model), budget_(budget),
          in_b_(static_cast<std::size_t>(model.size()), 0) {}

    // Coloured enumeration relative to the region b.
    Enumerator(const Model& model, const StateSet& b, std::int64_t budget)
        : model_(model), budget_(budget), in_b_(state_mask(model, b)),
          h_(h_function(model, b).values), ph_(h_transform_kernel(model, b)) {}

    const Law& law(Mode mode, StateIndex x, int depth) {
        const auto key = std::make_tuple(static_cast<int>(mode),
                                         static_cast<int>(x), depth);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        Law built = build(mode, x, depth);
        return memo_.emplace(key, std::move(built)).first->second;
    }

private:
    void charge(Law& target, const std::string& key, double weight) {
        const std::size_t before = target.size();
        target[key] += weight;
        if (target.size() != before && ++used_ > budget_)
            throw BudgetExceeded("tree enumeration exceeds the shape budget of " +
                                 std::to_string(budget_));
    }

    // sum_y kernel(x, y) law(mode, y, depth)
    Law mixture(Mode mode, const Eigen::MatrixXd& kernel, StateIndex x,
                int depth) {
        Law out;
        for (StateIndex y = 0; y < model_.size(); ++y) {
            const double w = kernel(x, y);
            if (w <= 0.0) continue;
            for (const auto& [enc, p] : law(mode, y, depth)) out[enc] += w * p;
        }
        return out;
    }

    // Adds every brood of `n` iid draws from `child` under a parent at x:
    // weight scale * n! * prod_e p_e^{c_e} / c_e!. `extra`, when given, is a
    // distinguished child (never equal to an iid draw: its colour differs)
    // merged into the canonical child order.
    void add_broods(Law& out, StateIndex x, char colour, const Law& child,
                    int n, double scale, const std::string* extra) {
        if (n == 0) {
            charge(out, wrap(x, colour, extra ? *extra : std::string()), scale);
            return;
        }
        if (child.empty()) return; // no mass to draw from
        std::vector<std::pair<const std::string*, double>> sup;
        sup.reserve(child.size());
        for (const auto& [enc, p] : child) sup.emplace_back(&enc, p);
        const double nfact = factorial(n);
        const EncLess less;
        std::vector<int> counts(sup.size(), 0);

        auto emit = [&](double weight) {
            std::string kids;
            bool placed = extra == nullptr;
            for (std::size_t i = 0; i < sup.size(); ++i) {
                if (counts[i] == 0) continue;
                if (!placed && less(*extra, *sup[i].first)) {
                    kids += *extra;
                    placed = true;
                }
                for (int c = 0; c < counts[i]; ++c) kids += *sup[i].first;
            }
            if (!placed) kids += *extra;
            charge(out, wrap(x, colour, kids), scale * nfact * weight);
        };
        // weight accumulates prod p_i^{c_i} / c_i!
        auto rec = [&](auto&& self, std::size_t i, int remaining,
                       double weight) -> void {
            if (i + 1 == sup.size()) {
                counts[i] = remaining;
                emit(weight * std::pow(sup[i].second, remaining) /
                     factorial(remaining));
                counts[i] = 0;
                return;
            }
            double factor = 1.0;
            for (int c = 0; c <= remaining; ++c) {
                counts[i] = c;
                self(self, i + 1, remaining - c, weight * factor);
                factor *= sup[i].second / (c + 1);
            }
            counts[i] = 0;
        };
        rec(rec, 0, n, 1.0);
    }

    Law build(Mode mode, StateIndex x, int depth) {
        const bool in_b = in_b_[static_cast<std::size_t>(x)] != 0;
        // Plain subtrees, and blue vertices inside the region (the blue line
        // stops there; the progeny is plain and white).
        if (mode == kPlain || mode == kWhite || in_b) {
            const char colour = mode == kPlain ? 'u' : (mode == kWhite ? 'w' : 'b');
            Law out;
            if (depth == 0) {
                charge(out, leaf_encoding(x, colour), 1.0);
                return out;
            }
            const Mode child_mode = mode == kPlain ? kPlain : kWhite;
            const Law child = mixture(child_mode, model_.motion(), x, depth - 1);
            for (const auto& [n, pn] : model_.offspring(x).entries())
                add_broods(out, x, colour, child, n, pn, nullptr);
            return out;
        }
        Law out;
        if (mode == kBlue) {
            if (depth == 0) {
                charge(out, leaf_encoding(x, 'b'), 1.0);
                return out;
            }
            const Law blue = mixture(kBlue, ph_, x, depth - 1);
            const Law white = mixture(kWhite, model_.motion(), x, depth - 1);
            const OffspringLaw biased = model_.offspring(x).size_biased();
            for (const auto& [n, pn] : biased.entries())
                for (const auto& [enc, p] : blue)
                    add_broods(out, x, 'b', white, n - 1, pn * p, &enc);
            return out;
        }
        // kReweighted, off the region: mass h(x) in total.
        if (depth == 0) {
            charge(out, leaf_encoding(x, 'b'), h_[x]);
            return out;
        }
        const Law rew = mixture(kReweighted, model_.motion(), x, depth - 1);
        const Law white = mixture(kWhite, model_.motion(), x, depth - 1);
        for (const auto& [n, pn] : model_.offspring(x).entries()) {
            if (n == 0) continue;
            for (const auto& [enc, p] : rew)
                add_broods(out, x, 'b', white, n - 1, pn * n * p, &enc);
        }
        return out;
    }

    const Model& model_;
    std::int64_t budget_ = 0;
    std::int64_t used_ = 0;
    std::vector<char> in_b_;
    Eigen::VectorXd h_;
    Eigen::MatrixXd ph_;
    std::map<std::tuple<int, int, int>, Law> memo_;
};

void check_start(const Model& model, StateIndex x, int depth) {
    if (x < 0 || x >= model.size())
        throw UnknownState("enumeration start state index out of range");
    if (depth < 0) throw DimensionMismatch("enumeration depth must be >= 0");
}

TreePmf to_pmf(const Law& law) {
    TreePmf out;
    for (const auto& [enc, p] : law) out.entries.emplace(enc, p);
    return out;
}

std::string format_stat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string format_exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> convolve(const std::vector<double>& a,
                             const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

} // namespace

TestReport make_report(std::string name, double statistic, double threshold,
                       std::int64_t sample_size, std::uint64_t seed,
                       std::string notes) {
    TestReport r;
    r.name = std::move(name);
    r.statistic = statistic;
    r.threshold = threshold;
    r.pass = statistic <= threshold;
    r.sample_size = sample_size;
    r.seed = seed;
    r.notes = std::move(notes);
    return r;
}

std::string report_text(const TestReport& r) {
    std::ostringstream os;
    os << (r.pass ? "[pass] " : "[FAIL] ") << r.name
       << "  statistic=" << format_stat(r.statistic)
       << " threshold=" << format_stat(r.threshold);
    if (r.sample_size > 0) os << " n=" << r.sample_size;
    os << " seed=" << r.seed;
    if (!r.notes.empty()) os << " (" << r.notes << ")";
    return os.str();
}

std::string report_csv(const TestReport& r) {
    std::string notes = r.notes;
    std::replace(notes.begin(), notes.end(), ',', ';');
    std::ostringstream os;
    os << r.name << ',' << format_exact(r.statistic) << ','
       << format_exact(r.threshold) << ',' << (r.pass ? "pass" : "fail") << ','
       << r.sample_size << ',' << r.seed << ',' << notes;
    return os.str();
}

std::string encode_forest(const Forest& tree) {
    const auto roots = tree.roots();
    if (roots.size() != 1)
        throw EncodingMismatch("canonical tree encoding needs exactly one root, got " +
                               std::to_string(roots.size()));
    auto enc = [&](auto&& self, Label label) -> std::string {
        const Individual& ind = tree.by_label(label);
        std::vector<std::string> kids;
        for (Label c : tree.children(label)) kids.push_back(self(self, c));
        std::sort(kids.begin(), kids.end(), EncLess{});
        std::string joined;
        for (const auto& k : kids) joined += k;
        return wrap(ind.location, colour_char(ind.colour), joined);
    };
    return enc(enc, roots[0]);
}

Forest decode_tree(const std::string& encoding) {
    Forest forest;
    std::size_t pos = 0;
    Label next = 0;
    auto parse = [&](auto&& self, Label parent, bool is_root) -> void {
        const std::size_t start = pos;
        while (pos < encoding.size() && encoding[pos] >= '0' &&
               encoding[pos] <= '9')
            ++pos;
        if (pos == start)
            throw ParseError("tree encoding: expected a location at offset " +
                             std::to_string(start));
        const long loc = std::strtol(encoding.c_str() + start, nullptr, 10);
        if (pos + 2 >= encoding.size() || encoding[pos] != ':')
            throw ParseError("tree encoding: expected ':colour(' at offset " +
                             std::to_string(pos));
        const Colour colour = colour_from_char(encoding[pos + 1]); // ParseError
        if (encoding[pos + 2] != '(')
            throw ParseError("tree encoding: expected '(' at offset " +
                             std::to_string(pos + 2));
        pos += 3;
        const Label me = next++;
        if (is_root)
            forest.add_root(me, static_cast<StateIndex>(loc), colour);
        else
            forest.add_child(parent, me, static_cast<StateIndex>(loc), colour);
        while (pos < encoding.size() && encoding[pos] != ')')
            self(self, me, false);
        if (pos >= encoding.size())
            throw ParseError("tree encoding: unterminated children list");
        ++pos; // ')'
    };
    parse(parse, 0, true);
    if (pos != encoding.size())
        throw ParseError("tree encoding: trailing characters at offset " +
                         std::to_string(pos));
    return forest;
}

TreePmf enumerate_truncated_bmc(const Model& model, StateIndex x, int depth,
                                std::int64_t budget) {
    check_start(model, x, depth);
    Enumerator en(model, budget);
    return to_pmf(en.law(Enumerator::kPlain, x, depth));
}

TreePmf enumerate_truncated_biased(const Model& model, const StateSet& b,
                                   StateIndex x, int depth,
                                   std::int64_t budget) {
    check_start(model, x, depth);
    Enumerator en(model, normalize_state_set(model, b), budget);
    return to_pmf(en.law(Enumerator::kBlue, x, depth));
}

TreePmf enumerate_truncated_reweighted(const Model& model, const StateSet& b,
                                       StateIndex x, int depth,
                                       std::int64_t budget) {
    check_start(model, x, depth);
    Enumerator en(model, normalize_state_set(model, b), budget);
    TreePmf out = to_pmf(en.law(Enumerator::kReweighted, x, depth));
    const double total = out.total();
    if (total <= 0.0)
        throw SolveFailure("reweighted tree law has no mass");
    for (auto& [enc, p] : out.entries) p /= total;
    return out;
}

std::vector<double> enumerate_entrance_count(const Model& model,
                                             const StateSet& b_in, StateIndex x,
                                             int depth) {
    check_start(model, x, depth);
    const StateSet b = normalize_state_set(model, b_in);
    const auto mask = state_mask(model, b);
    std::map<std::pair<StateIndex, int>, std::vector<double>> memo;
    auto law = [&](auto&& self, StateIndex y, int k) -> const std::vector<double>& {
        const auto key = std::make_pair(y, k);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        std::vector<double> out;
        if (mask[static_cast<std::size_t>(y)]) {
            out = {0.0, 1.0};
        } else if (k == 0) {
            out = {1.0};
        } else {
            std::vector<double> child{0.0};
            for (StateIndex z = 0; z < model.size(); ++z) {
                const double p = model.motion()(y, z);
                if (p <= 0.0) continue;
                const auto& sub = self(self, z, k - 1);
                if (child.size() < sub.size()) child.resize(sub.size(), 0.0);
                for (std::size_t i = 0; i < sub.size(); ++i)
                    child[i] += p * sub[i];
            }
            std::vector<double> power{1.0};
            int done = 0;
            for (const auto& [n, pn] : model.offspring(y).entries()) {
                while (done < n) {
                    power = convolve(power, child);
                    ++done;
                }
                if (out.size() < power.size()) out.resize(power.size(), 0.0);
                for (std::size_t i = 0; i < power.size(); ++i)
                    out[i] += pn * power[i];
            }
        }
        return memo.emplace(key, std::move(out)).first->second;
    };
    return law(law, x, depth);
}

double tv_distance(const TreePmf& a, const TreePmf& b) {
    if (a.scheme != b.scheme)
        throw EncodingMismatch("cannot compare laws with schemes '" + a.scheme +
                               "' and '" + b.scheme + "'");
    double sum = std::abs(a.excess - b.excess);
    for (const auto& [enc, p] : a.entries) {
        const auto it = b.entries.find(enc);
        sum += std::abs(p - (it == b.entries.end() ? 0.0 : it->second));
    }
    for (const auto& [enc, p] : b.entries)
        if (a.entries.find(enc) == a.entries.end()) sum += p;
    return 0.5 * sum;
}

double tv_threshold_one_sample(std::size_t support, std::int64_t n) {
    if (n <= 0) throw DimensionMismatch("sample size must be positive");
    return 2.0 * std::sqrt(static_cast<double>(support) /
                           static_cast<double>(n)) +
           0.005;
}

double tv_threshold_two_sample(std::size_t support, std::int64_t n_a,
                               std::int64_t n_b) {
    if (n_a <= 0 || n_b <= 0)
        throw DimensionMismatch("sample sizes must be positive");
    const double s = static_cast<double>(support);
    return std::sqrt(s / static_cast<double>(n_a)) +
           std::sqrt(s / static_cast<double>(n_b)) + 0.005;
}

TreePmf empirical_pmf(const std::map<std::string, std::int64_t>& counts,
                      std::int64_t n, std::string scheme) {
    if (n <= 0) throw DimensionMismatch("sample size must be positive");
    TreePmf out;
    out.scheme = std::move(scheme);
    std::int64_t seen = 0;
    for (const auto& [enc, k] : counts) {
        out.entries.emplace(enc, static_cast<double>(k) / static_cast<double>(n));
        seen += k;
    }
    if (seen > n) throw DimensionMismatch("counts exceed the sample size");
    // outcomes the caller did not encode (outside the window) land in excess
    out.excess = static_cast<double>(n - seen) / static_cast<double>(n);
    return out;
}

double regularized_gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0)
        throw DimensionMismatch("regularized gamma arguments out of range");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) {
        // lower series: P(a,x), then Q = 1 - P
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-16) break;
        }
        const double p = sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        return std::min(1.0, std::max(0.0, 1.0 - p));
    }
    // modified Lentz continued fraction for Q directly
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    const double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    return std::min(1.0, std::max(0.0, q));
}

double chi_square_pvalue(double statistic, double dof) {
    if (dof <= 0.0) throw DimensionMismatch("chi-square needs dof > 0");
    if (statistic <= 0.0) return 1.0;
    return regularized_gamma_q(dof / 2.0, statistic / 2.0);
}

double chi_square_quantile(double significance, double dof) {
    if (dof <= 0.0) throw DimensionMismatch("chi-square needs dof > 0");
    if (!(significance > 0.0 && significance < 1.0))
        throw DimensionMismatch("significance must lie in (0, 1)");
    double hi = dof + 10.0 * std::sqrt(2.0 * dof) + 10.0;
    while (chi_square_pvalue(hi, dof) > significance) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (chi_square_pvalue(mid, dof) > significance) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::string encode_path(const std::vector<StateIndex>& states,
                        const Model& model) {
    std::string out;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (i > 0) out += '>';
        out += model.name_of(states[i]);
    }
    return out;
}

std::vector<TestReport> spine_identity_test(const Model& model,
                                            const StateSet& b_in, StateIndex x,
                                            int depth, std::int64_t n_samples,
                                            std::uint64_t seed,
                                            double corrupt_h_scale,
                                            int workers) {
    const StateSet b = normalize_state_set(model, b_in);
    check_start(model, x, depth);
    if (n_samples <= 0) throw DimensionMismatch("sample size must be positive");

    std::ostringstream meta;
    meta << "x=" << model.name_of(x) << " depth=" << depth;
    if (corrupt_h_scale != 1.0) meta << " corrupt-h=" << corrupt_h_scale;

    std::vector<TestReport> reports;
    const TreePmf reweighted = enumerate_truncated_reweighted(model, b, x, depth);
    const TreePmf biased = enumerate_truncated_biased(model, b, x, depth);
    reports.push_back(make_report("spine-identity.exact",
                                  tv_distance(reweighted, biased), 1e-9, 0,
                                  seed, meta.str()));

    Eigen::MatrixXd kernel;
    if (corrupt_h_scale == 1.0) {
        kernel = h_transform_kernel(model, b);
    } else {
        Measure h = h_function(model, b);
        const auto mask = state_mask(model, b);
        for (StateIndex y = 0; y < model.size(); ++y)
            if (!mask[static_cast<std::size_t>(y)])
                h.values[y] *= corrupt_h_scale;
        kernel = h_transform_kernel(model, b, h);
    }
    SamplerCaps caps;
    caps.max_generations = depth;

    using Counts = std::map<std::string, std::int64_t>;
    const auto chunks = run_chunked<Counts>(
        n_samples, workers, [&](std::int64_t lo, std::int64_t hi) {
            Counts local;
            for (std::int64_t r = lo; r < hi; ++r) {
                Rng rng = Rng::fork(seed, static_cast<std::uint64_t>(r));
                const SpinePath spine = sample_spine(model, b, x, kernel, rng, caps);
                const Forest f = decorate(spine, model, b, rng, caps);
                ++local[encode_forest(f)];
            }
            return local;
        });
    Counts counts;
    for (const auto& chunk : chunks)
        for (const auto& [enc, k] : chunk) counts[enc] += k;
    const TreePmf sampled = empirical_pmf(counts, n_samples);

    std::size_t support = biased.entries.size();
    for (const auto& [enc, p] : sampled.entries)
        if (biased.entries.find(enc) == biased.entries.end()) ++support;
    reports.push_back(make_report("spine-identity.sampled",
                                  tv_distance(biased, sampled),
                                  tv_threshold_one_sample(support, n_samples),
                                  n_samples, seed, meta.str()));
    return reports;
}

} // namespace spinney
