#include "mdlcal/io.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mdlcal {

std::string format_sig(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string iso8601_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
}

namespace {

std::string strip_toml_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

nlohmann::json parse_toml_scalar(const std::string& raw) {
    const std::string t = trim(raw);
    if (t.empty()) throw ConfigError("toml: empty value");
    if (t.front() == '"') {
        if (t.size() < 2 || t.back() != '"') throw ConfigError("toml: unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < t.size(); ++i) {
            if (t[i] == '\\' && i + 2 < t.size()) {
                ++i;
                switch (t[i]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: throw ConfigError("toml: unsupported escape");
                }
            } else {
                out += t[i];
            }
        }
        return out;
    }
    if (t == "true") return true;
    if (t == "false") return false;
    // Number: integer when it parses cleanly as one, double otherwise.
    try {
        std::size_t used = 0;
        if (t.find_first_of(".eE") == std::string::npos) {
            const long long v = std::stoll(t, &used);
            if (used == t.size()) return v;
        }
        const double d = std::stod(t, &used);
        if (used == t.size()) return d;
    } catch (...) {
    }
    throw ConfigError("toml: cannot parse value '" + t + "'");
}

nlohmann::json parse_toml_value(const std::string& raw) {
    const std::string t = trim(raw);
    if (!t.empty() && t.front() == '[') {
        if (t.back() != ']') throw ConfigError("toml: arrays must close on the same line");
        nlohmann::json arr = nlohmann::json::array();
        std::string body = t.substr(1, t.size() - 2);
        std::string item;
        bool in_string = false;
        for (std::size_t i = 0; i < body.size(); ++i) {
            const char c = body[i];
            if (c == '"' && (i == 0 || body[i - 1] != '\\')) in_string = !in_string;
            if (c == ',' && !in_string) {
                if (!trim(item).empty()) arr.push_back(parse_toml_scalar(item));
                item.clear();
            } else {
                item += c;
            }
        }
        if (!trim(item).empty()) arr.push_back(parse_toml_scalar(item));
        return arr;
    }
    return parse_toml_scalar(t);
}

}  // namespace

nlohmann::json toml_to_json(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;

    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(strip_toml_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("toml: malformed table header");
            const std::string path = trim(line.substr(1, line.size() - 2));
            if (path.empty()) throw ConfigError("toml: empty table header");
            table = &root;
            std::size_t start = 0;
            while (start <= path.size()) {
                const std::size_t dotpos = path.find('.', start);
                const std::string part =
                    trim(path.substr(start, dotpos == std::string::npos ? std::string::npos
                                                                        : dotpos - start));
                if (part.empty()) throw ConfigError("toml: malformed table path");
                table = &(*table)[part];
                if (table->is_null()) *table = nlohmann::json::object();
                if (dotpos == std::string::npos) break;
                start = dotpos + 1;
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("toml: expected key = value: " + line);
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("toml: empty key");
        (*table)[key] = parse_toml_value(line.substr(eq + 1));
    }
    return root;
}

nlohmann::json load_structured(const std::string& path) {
    const std::string text = read_file(path);
    if (std::filesystem::path(path).extension() == ".toml") {
        return toml_to_json(text);
    }
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse '" + path + "': " + e.what());
    }
}

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_array()) {
        throw InvalidDistribution(std::string("missing array field '") + field + "'");
    }
    std::vector<std::string> out;
    for (const auto& item : j[field]) {
        if (!item.is_string()) {
            throw InvalidDistribution(std::string("field '") + field + "' must hold strings");
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::vector<std::vector<double>> number_table(const nlohmann::json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_array()) {
        throw InvalidDistribution(std::string("missing table field '") + field + "'");
    }
    std::vector<std::vector<double>> out;
    for (const auto& row : j[field]) {
        if (!row.is_array()) {
            throw InvalidDistribution(std::string("field '") + field + "' must hold rows");
        }
        std::vector<double> r;
        for (const auto& cell : row) {
            if (!cell.is_number()) {
                throw InvalidDistribution(std::string("field '") + field +
                                          "' must hold numbers");
            }
            r.push_back(cell.get<double>());
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

FiniteJoint joint_from_json(const nlohmann::json& j) {
    const auto xs = string_list(j, "x_labels");
    const auto ys = string_list(j, "y_labels");
    const auto table = number_table(j, "probs");
    if (table.size() != xs.size()) {
        throw InvalidDistribution("probs has " + std::to_string(table.size()) + " rows for " +
                                  std::to_string(xs.size()) + " features");
    }
    std::vector<double> flat;
    flat.reserve(xs.size() * ys.size());
    for (const auto& row : table) {
        if (row.size() != ys.size()) {
            throw InvalidDistribution("probs row width does not match y_labels");
        }
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return FiniteJoint(FeatureSpace(xs), LabelSpace(ys), std::move(flat));
}

Predictor predictor_from_json(const nlohmann::json& j) {
    const auto xs = string_list(j, "x_labels");
    const auto table = number_table(j, "forecasts");
    if (table.size() != xs.size()) {
        throw InvalidForecast("forecasts has " + std::to_string(table.size()) + " rows for " +
                              std::to_string(xs.size()) + " features");
    }
    std::vector<Forecast> fs;
    fs.reserve(table.size());
    for (const auto& row : table) fs.emplace_back(row);
    return Predictor(FeatureSpace(xs), std::move(fs));
}

CostMatrix cost_matrix_from_json(const nlohmann::json& j) {
    return CostMatrix(string_list(j, "actions"), number_table(j, "costs"));
}

// ---------------------------------------------------------------------------
// JsonWriter
// ---------------------------------------------------------------------------

void JsonWriter::comma() {
    if (!has_items_.empty() && has_items_.back() && !pending_key_) out_ += ",";
    if (!has_items_.empty() && !pending_key_) has_items_.back() = true;
}

void JsonWriter::begin_object() {
    comma();
    pending_key_ = false;
    out_ += "{";
    has_items_.push_back(false);
}

void JsonWriter::end_object() {
    has_items_.pop_back();
    out_ += "}";
}

void JsonWriter::begin_array() {
    comma();
    pending_key_ = false;
    out_ += "[";
    has_items_.push_back(false);
}

void JsonWriter::end_array() {
    has_items_.pop_back();
    out_ += "]";
}

void JsonWriter::key(const std::string& k) {
    comma();
    out_ += nlohmann::json(k).dump();
    out_ += ":";
    pending_key_ = true;
}

void JsonWriter::value(double v) {
    comma();
    pending_key_ = false;
    out_ += format_sig(v);
}

void JsonWriter::value(const std::string& s) {
    comma();
    pending_key_ = false;
    out_ += nlohmann::json(s).dump();
}

void JsonWriter::value(const char* s) { value(std::string(s)); }

void JsonWriter::value(bool b) {
    comma();
    pending_key_ = false;
    out_ += b ? "true" : "false";
}

void JsonWriter::value_u64(std::uint64_t v) {
    comma();
    pending_key_ = false;
    out_ += std::to_string(v);
}

void write_joint(JsonWriter& w, const FiniteJoint& j) {
    w.begin_object();
    w.key("x_labels");
    w.begin_array();
    for (const auto& s : j.x_space().points()) w.value(s);
    w.end_array();
    w.key("y_labels");
    w.begin_array();
    for (const auto& s : j.y_space().labels()) w.value(s);
    w.end_array();
    w.key("probs");
    w.begin_array();
    for (std::size_t i = 0; i < j.n(); ++i) {
        w.begin_array();
        for (std::size_t y = 0; y < j.m(); ++y) w.value(j.at(i, y));
        w.end_array();
    }
    w.end_array();
    w.end_object();
}

void write_predictor(JsonWriter& w, const Predictor& h) {
    w.begin_object();
    w.key("x_labels");
    w.begin_array();
    for (const auto& s : h.x_space().points()) w.value(s);
    w.end_array();
    w.key("forecasts");
    w.begin_array();
    for (std::size_t i = 0; i < h.n(); ++i) {
        w.begin_array();
        for (std::size_t y = 0; y < h.m(); ++y) w.value(h.at(i)[y]);
        w.end_array();
    }
    w.end_array();
    w.end_object();
}

}  // namespace mdlcal
