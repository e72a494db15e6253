#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sar {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;

/// Lower-cased words of letters, digits and apostrophes.
std::vector<std::string> tokenize(std::string_view text);

/// Replaces each {{name}} with its value; unknown placeholders are left as-is.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string read_text_file(const std::string& path);

/// Directory holding shipped data; $SARGUARD_DATA_DIR overrides the build-time default.
std::string data_dir();
std::string data_path(std::string_view relative);

} // namespace sar
