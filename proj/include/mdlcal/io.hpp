#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdlcal/dist.hpp"
#include "mdlcal/scoring.hpp"

namespace mdlcal {

// All numeric report fields go through this: 12 significant digits, so reruns
// compare byte-for-byte without bit-level float formatting concerns.
std::string format_sig(double x);

std::uint64_t fnv1a64(const std::string& bytes);

std::string iso8601_utc_now();

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Parses .json directly; .toml goes through the bundled subset reader
// (tables, key = value scalars, single-line arrays, comments).
nlohmann::json load_structured(const std::string& path);
nlohmann::json toml_to_json(const std::string& text);

// {"x_labels": [...], "y_labels": [...], "probs": [[row-major n x m]]}
FiniteJoint joint_from_json(const nlohmann::json& j);

// {"x_labels": [...], "y_labels": [...], "forecasts": [[...]]}
Predictor predictor_from_json(const nlohmann::json& j);

// {"actions": [...], "costs": [[...]]}
CostMatrix cost_matrix_from_json(const nlohmann::json& j);

// Deterministic JSON emitter. Insertion order is preserved and every double is
// rendered with format_sig.
class JsonWriter {
public:
    void begin_object();
    void end_object();
    void begin_array();
    void end_array();
    void key(const std::string& k);
    void value(double v);
    void value(const std::string& s);
    void value(const char* s);
    void value(bool b);
    void value_u64(std::uint64_t v);

    std::string str() const { return out_; }

private:
    void comma();
    void newline_indent();

    std::string out_;
    std::vector<bool> has_items_;
    bool pending_key_ = false;
};

void write_joint(JsonWriter& w, const FiniteJoint& j);
void write_predictor(JsonWriter& w, const Predictor& h);

}  // namespace mdlcal
