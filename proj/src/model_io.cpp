#include "spinney/model_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include "spinney/errors.hpp"

namespace spinney {

namespace {

std::string at(int line) { return "line " + std::to_string(line) + ": "; }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> tokenize(const std::string& raw) {
    std::string text = raw.substr(0, raw.find('#'));
    std::istringstream ss(text);
    std::vector<std::string> toks;
    for (std::string t; ss >> t;) toks.push_back(std::move(t));
    return toks;
}

double parse_number(const std::string& tok, int line) {
    double v = 0.0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc{} || r.ptr != e)
        throw ParseError(at(line) + "bad number '" + tok + "'");
    return v;
}

double parse_prob(const std::string& tok, int line) {
    const double v = parse_number(tok, line);
    if (v < 0.0) throw ParseError(at(line) + "negative probability '" + tok + "'");
    return v;
}

int parse_offspring_count(const std::string& tok, int line) {
    int v = 0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc{} || r.ptr != e || v < 0)
        throw ParseError(at(line) + "bad offspring count '" + tok + "'");
    return v;
}

bool reserved(const std::string& name) {
    return name == "states" || name == "motion" || name == "offspring" ||
           name == "B" || name == "model" || name == "end" || name == "*";
}

// One model under construction; sections may come in any order after states.
struct Builder {
    std::string name;
    std::vector<std::string> states;
    std::map<std::string, StateIndex> index;
    Eigen::MatrixXd motion;
    std::set<std::pair<StateIndex, StateIndex>> motion_seen;
    std::map<std::string, std::vector<std::pair<int, double>>> laws;
    std::optional<std::vector<std::pair<int, double>>> wildcard_law;
    StateSet region;
    bool has_motion = false;
    bool has_region = false;

    StateIndex lookup(const std::string& name, int line) const {
        auto it = index.find(name);
        if (it == index.end())
            throw ParseError(at(line) + "unknown state '" + name + "'");
        return it->second;
    }

    void set_states(const std::vector<std::string>& toks, int line) {
        if (!states.empty()) throw ParseError(at(line) + "duplicate states section");
        if (toks.size() < 2) throw ParseError(at(line) + "empty states list");
        for (std::size_t i = 1; i < toks.size(); ++i) {
            if (reserved(toks[i]))
                throw ParseError(at(line) + "reserved state name '" + toks[i] + "'");
            if (!index.emplace(toks[i], static_cast<StateIndex>(i - 1)).second)
                throw ParseError(at(line) + "duplicate state '" + toks[i] + "'");
            states.push_back(toks[i]);
        }
        const auto n = static_cast<Eigen::Index>(states.size());
        motion = Eigen::MatrixXd::Zero(n, n);
    }

    void require_states(const std::string& key, int line) const {
        if (states.empty())
            throw ParseError(at(line) + "'" + key + "' before the states section");
    }

    void add_motion_entry(const std::vector<std::string>& toks, int line) {
        if (toks.size() != 3)
            throw ParseError(at(line) + "motion lines are 'x y prob'");
        const StateIndex x = lookup(toks[0], line);
        const StateIndex y = lookup(toks[1], line);
        if (!motion_seen.emplace(x, y).second)
            throw ParseError(at(line) + "duplicate motion entry " + toks[0] + " " + toks[1]);
        motion(x, y) = parse_prob(toks[2], line);
    }

    void set_region(const std::vector<std::string>& toks, int line) {
        require_states("B", line);
        if (has_region) throw ParseError(at(line) + "duplicate B section");
        if (toks.size() < 2) throw ParseError(at(line) + "empty B list");
        for (std::size_t i = 1; i < toks.size(); ++i)
            region.push_back(lookup(toks[i], line));
        has_region = true;
    }

    NamedModel finish(int line) const {
        const std::string what = name.empty() ? "model file" : "model '" + name + "'";
        if (states.empty()) throw ParseError(at(line) + what + " has no states section");
        if (!has_motion) throw ParseError(at(line) + what + " has no motion section");
        std::vector<OffspringLaw> offspring;
        offspring.reserve(states.size());
        for (const auto& s : states) {
            auto it = laws.find(s);
            if (it != laws.end()) offspring.push_back(OffspringLaw::from_entries(it->second));
            else if (wildcard_law) offspring.push_back(OffspringLaw::from_entries(*wildcard_law));
            else throw MissingOffspringLaw("state '" + s + "' of " + what + " has no offspring law");
        }
        Model model = Model::build(states, motion, std::move(offspring));
        model.set_default_b(region);
        return {name, std::move(model)};
    }
};

} // namespace

std::vector<NamedModel> read_model_file(std::istream& is) {
    std::vector<NamedModel> out;
    std::set<std::string> used_names;
    std::optional<bool> named_mode;
    std::optional<Builder> cur;

    enum class Block { None, Motion, Offspring };
    Block block = Block::None;
    int block_line = 0;
    std::string offspring_state;
    std::vector<std::pair<int, double>> offspring_entries;
    std::set<int> offspring_counts;

    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto toks = tokenize(raw);
        if (toks.empty()) continue;

        if (block == Block::Motion) {
            if (toks.size() == 1 && toks[0] == "end") block = Block::None;
            else cur->add_motion_entry(toks, line);
            continue;
        }
        if (block == Block::Offspring) {
            if (toks.size() == 1 && toks[0] == "end") {
                if (offspring_state == "*") cur->wildcard_law = std::move(offspring_entries);
                else cur->laws.emplace(offspring_state, std::move(offspring_entries));
                block = Block::None;
            } else {
                if (toks.size() != 2)
                    throw ParseError(at(line) + "offspring lines are 'count prob'");
                const int count = parse_offspring_count(toks[0], line);
                if (!offspring_counts.insert(count).second)
                    throw ParseError(at(line) + "duplicate offspring count " + toks[0]);
                offspring_entries.emplace_back(count, parse_prob(toks[1], line));
            }
            continue;
        }

        const std::string& key = toks[0];
        if (!named_mode) named_mode = (key == "model");

        if (*named_mode && !cur) {
            if (key != "model")
                throw ParseError(at(line) + "expected 'model NAME' in a multi-model file");
            if (toks.size() != 2)
                throw ParseError(at(line) + "'model' takes exactly one name");
            if (reserved(toks[1]))
                throw ParseError(at(line) + "reserved model name '" + toks[1] + "'");
            if (!used_names.insert(toks[1]).second)
                throw ParseError(at(line) + "duplicate model '" + toks[1] + "'");
            cur.emplace();
            cur->name = toks[1];
            continue;
        }
        if (key == "model") {
            throw ParseError(at(line) + (*named_mode
                ? "'model' inside an open model block"
                : "'model' cannot follow bare sections"));
        }
        if (!cur) cur.emplace();

        if (key == "states") {
            cur->set_states(toks, line);
        } else if (key == "motion") {
            cur->require_states(key, line);
            if (toks.size() != 1) throw ParseError(at(line) + "'motion' takes no arguments");
            if (cur->has_motion) throw ParseError(at(line) + "duplicate motion section");
            cur->has_motion = true;
            block = Block::Motion;
            block_line = line;
        } else if (key == "offspring") {
            cur->require_states(key, line);
            if (toks.size() != 2)
                throw ParseError(at(line) + "'offspring' takes exactly one state (or '*')");
            if (toks[1] == "*") {
                if (cur->wildcard_law)
                    throw ParseError(at(line) + "duplicate offspring block for '*'");
            } else {
                cur->lookup(toks[1], line);
                if (cur->laws.count(toks[1]))
                    throw ParseError(at(line) + "duplicate offspring block for state '" + toks[1] + "'");
            }
            block = Block::Offspring;
            block_line = line;
            offspring_state = toks[1];
            offspring_entries.clear();
            offspring_counts.clear();
        } else if (key == "B") {
            cur->set_region(toks, line);
        } else if (key == "end") {
            if (!*named_mode) throw ParseError(at(line) + "'end' without an open block");
            out.push_back(cur->finish(line));
            cur.reset();
        } else {
            throw ParseError(at(line) + "unknown key '" + key + "'");
        }
    }

    if (block != Block::None)
        throw ParseError(at(block_line) + "unterminated '" +
                         (block == Block::Motion ? std::string("motion") : "offspring") +
                         "' block");
    if (!named_mode) throw ParseError("model file has no content");
    if (*named_mode) {
        if (cur) throw ParseError(at(line) + "unterminated 'model' block");
    } else {
        out.push_back(cur->finish(line));
    }
    return out;
}

Model load_model(const std::string& spec) {
    const auto hash = spec.find('#');
    const std::string path = spec.substr(0, hash);
    const std::string want = hash == std::string::npos ? "" : spec.substr(hash + 1);

    std::ifstream file(path);
    if (!file) throw IoError("cannot open model file '" + path + "'");
    auto models = read_model_file(file);

    auto listing = [&models] {
        std::string names;
        for (const auto& nm : models) {
            if (!names.empty()) names += ", ";
            names += nm.name.empty() ? "<unnamed>" : nm.name;
        }
        return names;
    };
    if (want.empty()) {
        if (models.size() == 1) return std::move(models.front().model);
        throw ParseError("'" + path + "' defines several models (" + listing() +
                         "); reference one as '" + path + "#name'");
    }
    for (auto& nm : models)
        if (nm.name == want) return std::move(nm.model);
    throw UnknownLabel("no model named '" + want + "' in '" + path +
                       "' (defines " + listing() + ")");
}

void write_model_file(std::ostream& os, const std::vector<NamedModel>& models) {
    if (models.size() == 1 && models.front().name.empty()) {
        write_model_file(os, models.front().model);
        return;
    }
    bool first = true;
    for (const auto& nm : models) {
        if (nm.name.empty())
            throw ParseError("every model in a multi-model file needs a name");
        if (!first) os << "\n";
        first = false;
        write_model_file(os, nm.model, nm.name);
    }
}

void write_model_file(std::ostream& os, const Model& model, const std::string& name) {
    const std::string pad = name.empty() ? "" : "  ";
    if (!name.empty()) os << "model " << name << "\n";

    os << pad << "states";
    for (const auto& s : model.states()) os << " " << s;
    os << "\n\n" << pad << "motion\n";
    for (StateIndex x = 0; x < model.size(); ++x)
        for (StateIndex y = 0; y < model.size(); ++y)
            if (model.motion()(x, y) != 0.0)
                os << pad << "  " << model.name_of(x) << " " << model.name_of(y)
                   << " " << fmt(model.motion()(x, y)) << "\n";
    os << pad << "end\n";
    for (StateIndex x = 0; x < model.size(); ++x) {
        os << "\n" << pad << "offspring " << model.name_of(x) << "\n";
        for (const auto& [count, prob] : model.offspring(x).entries())
            os << pad << "  " << count << " " << fmt(prob) << "\n";
        os << pad << "end\n";
    }
    if (!model.default_b().empty()) {
        os << "\n" << pad << "B";
        for (StateIndex x : model.default_b()) os << " " << model.name_of(x);
        os << "\n";
    }
    if (!name.empty()) os << "end\n";
}

} // namespace spinney
