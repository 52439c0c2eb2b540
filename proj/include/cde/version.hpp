#pragma once

#include <string>

namespace cde {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

/// First line of every CSV the tool writes; readers skip '#' lines.
inline std::string csv_schema_line(const std::string& schema) {
    return "# schema=" + schema + " schema_version=" + std::to_string(kSchemaVersion) + "\n";
}

}  // namespace cde
