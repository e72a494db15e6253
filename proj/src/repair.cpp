#include "sarguard/repair.hpp"

#include "sarguard/error.hpp"
#include "sarguard/text.hpp"

#include <cctype>
#include <charconv>
#include <fstream>

namespace sar {

using nlohmann::json;

namespace {

bool type_matches(const json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "number") return v.is_number();
    if (type == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>())));
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    return false;
}

void validate_node(const json& v, const json& schema, const std::string& path, std::vector<std::string>& out) {
    if (auto t = schema.find("type"); t != schema.end() && !type_matches(v, t->get<std::string>())) {
        out.push_back(path + ": expected " + t->get<std::string>());
        return;
    }
    if (auto e = schema.find("enum"); e != schema.end()) {
        bool found = false;
        for (const auto& option : *e) found = found || option == v;
        if (!found) out.push_back(path + ": value " + v.dump() + " not in enum");
    }
    if (v.is_number()) {
        if (auto m = schema.find("minimum"); m != schema.end() && v.get<double>() < m->get<double>())
            out.push_back(path + ": below minimum");
        if (auto m = schema.find("maximum"); m != schema.end() && v.get<double>() > m->get<double>())
            out.push_back(path + ": above maximum");
    }
    if (v.is_object()) {
        const json props = schema.value("properties", json::object());
        for (const auto& r : schema.value("required", json::array()))
            if (!v.contains(r.get<std::string>())) out.push_back(path + ": missing required field '" + r.get<std::string>() + "'");
        const bool closed = schema.contains("additionalProperties") && schema["additionalProperties"] == false;
        for (const auto& [k, child] : v.items()) {
            if (auto p = props.find(k); p != props.end())
                validate_node(child, *p, path + "." + k, out);
            else if (closed)
                out.push_back(path + ": unexpected field '" + k + "'");
        }
    }
    if (v.is_array())
        if (auto items = schema.find("items"); items != schema.end())
            for (std::size_t i = 0; i < v.size(); ++i) validate_node(v[i], *items, path + "[" + std::to_string(i) + "]", out);
}

std::string key_form(std::string_view s) {
    std::string out;
    for (char c : s)
        if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::string strip_fences(const std::string& text) {
    auto open = text.find("```");
    if (open == std::string::npos) return text;
    auto line_end = text.find('\n', open);
    if (line_end == std::string::npos) return text;
    auto close = text.find("```", line_end);
    return text.substr(line_end + 1, close == std::string::npos ? std::string::npos : close - line_end - 1);
}

std::string normalize_quotes(std::string s) {
    s = replace_all(std::move(s), "\xE2\x80\x9C", "\"");
    s = replace_all(std::move(s), "\xE2\x80\x9D", "\"");
    s = replace_all(std::move(s), "\xE2\x80\x98", "'");
    s = replace_all(std::move(s), "\xE2\x80\x99", "'");
    return s;
}

std::string drop_trailing_commas(const std::string& s) {
    std::string out;
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_str) {
            out.push_back(c);
            if (c == '\\' && i + 1 < s.size()) out.push_back(s[++i]);
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        if (c == ',') {
            std::size_t j = i + 1;
            while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
            if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;
        }
        out.push_back(c);
    }
    return out;
}

// Rewrites 'single quoted' strings, bare keys and Python literals outside of
// double-quoted strings.
std::string relax_syntax(const std::string& s) {
    std::string out;
    std::size_t i = 0;
    auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; };
    while (i < s.size()) {
        char c = s[i];
        if (c == '"') {
            std::size_t j = i + 1;
            while (j < s.size() && s[j] != '"') j += (s[j] == '\\') ? 2 : 1;
            out.append(s, i, std::min(j + 1, s.size()) - i);
            i = j + 1;
            continue;
        }
        if (c == '\'') {
            std::size_t j = i + 1;
            std::string body;
            while (j < s.size() && s[j] != '\'') {
                if (s[j] == '"') body.push_back('\\');
                body.push_back(s[j]);
                ++j;
            }
            out += '"' + body + '"';
            i = j + 1;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && is_ident(s[j])) ++j;
            std::string word = s.substr(i, j - i);
            std::size_t k = j;
            while (k < s.size() && std::isspace(static_cast<unsigned char>(s[k]))) ++k;
            if (k < s.size() && s[k] == ':') out += '"' + word + '"';
            else if (word == "True") out += "true";
            else if (word == "False") out += "false";
            else if (word == "None" || word == "null") out += "null";
            else out += word;
            i = j;
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

std::optional<json> try_parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return std::nullopt;
    }
}

std::optional<std::string> match_enum(const std::string& value, const json& options) {
    const std::string v = trim(value);
    std::string stripped = v;
    while (!stripped.empty() && (stripped.back() == '.' || stripped.back() == '!')) stripped.pop_back();
    for (const auto& o : options)
        if (o.is_string() && iequals(o.get<std::string>(), stripped)) return o.get<std::string>();
    // Unique option that starts with the value at a word boundary ("waterways" -> "Waterways Search").
    std::optional<std::string> hit;
    for (const auto& o : options) {
        if (!o.is_string()) continue;
        const std::string opt = o.get<std::string>();
        if (stripped.empty() || opt.size() <= stripped.size()) continue;
        if (iequals(std::string_view(opt).substr(0, stripped.size()), stripped) && opt[stripped.size()] == ' ') {
            if (hit) return std::nullopt;
            hit = opt;
        }
    }
    return hit;
}

void coerce(json& v, const json& schema, const std::string& path, std::vector<std::string>& notes) {
    const std::string type = schema.value("type", std::string());
    if (type == "object" && v.is_object()) {
        const json props = schema.value("properties", json::object());
        json fixed = json::object();
        for (auto& [k, child] : v.items()) {
            std::string target = k;
            if (!props.contains(k)) {
                for (const auto& [pk, _] : props.items())
                    if (key_form(pk) == key_form(k)) {
                        target = pk;
                        notes.push_back(path + ": renamed '" + k + "' to '" + pk + "'");
                        break;
                    }
            }
            if (!props.contains(target) && schema.contains("additionalProperties") && schema["additionalProperties"] == false) {
                notes.push_back(path + ": dropped unexpected field '" + k + "'");
                continue;
            }
            if (!fixed.contains(target)) fixed[target] = child;
        }
        for (const auto& [pk, ps] : props.items()) {
            if (fixed.contains(pk)) {
                coerce(fixed[pk], ps, path + "." + pk, notes);
            } else if (ps.contains("default")) {
                fixed[pk] = ps["default"];
                notes.push_back(path + ": filled default for '" + pk + "'");
            }
        }
        v = std::move(fixed);
        return;
    }
    if (type == "array") {
        if (!v.is_array() && !v.is_null()) {
            v = json::array({v});
            notes.push_back(path + ": wrapped scalar in array");
        }
        if (v.is_array())
            if (auto items = schema.find("items"); items != schema.end())
                for (std::size_t i = 0; i < v.size(); ++i) coerce(v[i], *items, path + "[" + std::to_string(i) + "]", notes);
        return;
    }
    if (type == "string" && v.is_string()) {
        if (auto e = schema.find("enum"); e != schema.end()) {
            if (auto m = match_enum(v.get<std::string>(), *e); m && *m != v.get<std::string>()) {
                notes.push_back(path + ": coerced enum '" + v.get<std::string>() + "' to '" + *m + "'");
                v = *m;
            }
        }
        return;
    }
    if ((type == "number" || type == "integer") && v.is_string()) {
        const std::string s = trim(v.get<std::string>());
        double d = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
        if (ec == std::errc{} && p == s.data() + s.size()) {
            v = d;
            notes.push_back(path + ": parsed number from string");
        }
        return;
    }
    if (type == "boolean" && v.is_string()) {
        const std::string s = to_lower(trim(v.get<std::string>()));
        if (s == "true" || s == "yes") v = true;
        else if (s == "false" || s == "no") v = false;
        else return;
        notes.push_back(path + ": parsed boolean from string");
    }
}

} // namespace

StageSchema::StageSchema(json doc) : doc_(std::move(doc)) {
    if (!doc_.is_object() || doc_.value("type", std::string()) != "object")
        throw Error(ErrorCode::validation, "stage schema must describe an object");
    stage_ = doc_.value("stage", 0);
}

std::vector<std::string> StageSchema::validate(const json& value) const {
    std::vector<std::string> out;
    validate_node(value, doc_, "$", out);
    return out;
}

StageSchema load_stage_schema_file(const std::string& path) {
    try {
        return StageSchema(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse, "stage schema '" + path + "' is not valid JSON: " + e.what());
    }
}

std::optional<std::string> extract_json_object(const std::string& text) {
    auto start = text.find('{');
    if (start == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_str = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_str) {
            if (c == '\\') ++i;
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return text.substr(start, i - start + 1);
    }
    return std::nullopt;
}

std::optional<json> mechanical_repair(const std::string& raw, const StageSchema& schema, std::vector<std::string>& notes) {
    std::string text = normalize_quotes(strip_fences(raw));
    if (auto block = extract_json_object(text)) text = *block;

    std::optional<json> parsed = try_parse(text);
    if (!parsed) parsed = try_parse(drop_trailing_commas(text));
    if (!parsed) parsed = try_parse(drop_trailing_commas(relax_syntax(text)));
    if (!parsed || !parsed->is_object()) {
        notes.push_back("no parseable object");
        return std::nullopt;
    }
    json value = *parsed;
    coerce(value, schema.document(), "$", notes);
    auto problems = schema.validate(value);
    if (!problems.empty()) {
        notes.insert(notes.end(), problems.begin(), problems.end());
        return std::nullopt;
    }
    return value;
}

RepairOutcome validate_and_repair(const std::string& raw, const StageSchema& schema, int budget, const Regenerate& regenerate) {
    RepairOutcome out;
    std::string current = raw;
    for (int attempt = 0;; ++attempt) {
        out.raw = current;
        if (auto direct = try_parse(current); direct && schema.accepts(*direct)) {
            out.ok = true;
            out.payload = std::move(*direct);
            out.repaired = attempt > 0;
            return out;
        }
        std::vector<std::string> notes;
        if (auto fixed = mechanical_repair(current, schema, notes)) {
            out.ok = true;
            out.payload = std::move(*fixed);
            out.repaired = true;
            out.notes.insert(out.notes.end(), notes.begin(), notes.end());
            return out;
        }
        const std::string problem = notes.empty() ? std::string("unparseable output") : notes.back();
        out.notes.push_back("attempt " + std::to_string(attempt) + ": " + problem);
        if (attempt >= budget || !regenerate) {
            out.error = "output still invalid after " + std::to_string(out.regenerations) + " regenerations: " + problem;
            return out;
        }
        auto next = regenerate(attempt + 1, problem);
        if (!next) {
            out.error = "backend unavailable during regeneration";
            return out;
        }
        ++out.regenerations;
        current = *next;
    }
}

} // namespace sar
