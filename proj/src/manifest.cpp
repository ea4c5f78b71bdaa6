#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "thermofuse/detection.hpp"
#include "thermofuse/error.hpp"

namespace thermofuse {

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.image_id = j.at("image_id").get<std::string>();
      e.vis_path = j.value("vis_path", "");
      e.tir_path = j.value("tir_path", "");
      e.gt_vis_path = j.value("gt_vis_path", "");
      e.gt_tir_path = j.value("gt_tir_path", "");
      if (j.contains("split") && !j["split"].is_null()) {
        const auto s = j["split"].get<std::string>();
        e.split = split_from_string(s);
        if (!e.split) throw Error(ErrorCode::MalformedLine, "unknown split '" + s + "'", line_no);
      }
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::MalformedLine, path + ": " + ex.what(), line_no);
    }
  }
  return out;
}

void write_manifest(const std::string& path, std::span<const ManifestEntry> entries) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest " + path);
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["image_id"] = e.image_id;
    j["vis_path"] = e.vis_path;
    j["tir_path"] = e.tir_path;
    j["gt_vis_path"] = e.gt_vis_path;
    j["gt_tir_path"] = e.gt_tir_path;
    if (e.split) {
      j["split"] = std::string(to_string(*e.split));
    } else {
      j["split"] = nullptr;
    }
    out << j.dump() << '\n';
  }
}

}  // namespace thermofuse
