#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spinney/model.hpp"

namespace spinney {

struct NamedModel {
    std::string name; // empty when the file declares one bare model
    Model model;
};

// Parses a model file. The format is line-oriented structured text ('#'
// starts a comment, blank lines are skipped):
//
//   states 0 1 2          one line, state names in order
//   motion                block of "x y prob" triplets, closed by "end"
//     0 1 1
//     ...
//   end
//   offspring 0           block of "count prob" pairs, closed by "end";
//     0 0.6               "offspring *" supplies the law for every state
//     2 0.4               without a block of its own
//   end
//   B 0                   optional default norming region
//
// A file holds either one bare model or several named ones, each wrapped in
// "model NAME" .. "end". Unknown keys and malformed lines throw ParseError
// naming the line; model-level validation (row sums, probabilities) is
// delegated to Model::build.
std::vector<NamedModel> read_model_file(std::istream& is);

// Loads one model from "path" or "path#name". A bare file ignores a missing
// fragment; a multi-model file requires one. Unknown names throw UnknownLabel
// listing the models the file defines.
Model load_model(const std::string& spec);

// Canonical emission; read_model_file round-trips it exactly.
void write_model_file(std::ostream& os, const std::vector<NamedModel>& models);
void write_model_file(std::ostream& os, const Model& model,
                      const std::string& name = "");

} // namespace spinney
