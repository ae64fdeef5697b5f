#pragma once

#include <string>
#include <variant>

#include "shm/damage.hpp"
#include "shm/predictor.hpp"
#include "shm/sysid.hpp"

namespace shm::io {

inline constexpr int kFormatVersion = 1;

using Model = std::variant<sysid::ArModel, sysid::MlpModel, dmg::ClassifierModel>;

/// Model JSON. Doubles are written in shortest round-trip form, so a
/// save/load cycle reproduces every parameter bit for bit.
std::string dump_model(const Model& model);
/// Throws MalformedFile (naming the offending field) or UnsupportedVersion.
Model parse_model(const std::string& text);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

std::string read_file(const std::string& path);
/// Writes via a temporary file and rename, so readers never see a partial file.
void write_file(const std::string& path, const std::string& contents);

}  // namespace shm::io
