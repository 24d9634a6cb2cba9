#include <nlohmann/json.hpp>

#include "impact/io.hpp"
#include "impact/surrogate.hpp"

namespace impact {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestHeader =
    "id,alpha_deg,beta_deg,y_mm,z_mm,speed_mps,theta_deg,eta_deg,region,"
    "peak_force_helmet_kN,peak_force_head_kN,kinematics_csv,forces_csv,"
    "metadata_json,mirrored";

std::string manifest_row(const DatasetEntry& e, const std::string& kin_rel,
                         const std::string& force_rel, const std::string& meta_rel) {
  using io::format_double;
  std::string row = e.id;
  row += ',' + format_double(e.impact.setup.alpha_deg);
  row += ',' + format_double(e.impact.setup.beta_deg);
  row += ',' + format_double(e.impact.setup.y_mm);
  row += ',' + format_double(e.impact.setup.z_mm);
  row += ',' + format_double(e.impact.setup.speed_mps);
  row += ',' + format_double(e.impact.location.theta_deg);
  row += ',' + format_double(e.impact.location.eta_deg);
  row += ',' + std::string(region_name(e.impact.region));
  row += ',' + format_double(e.impact.force_helmet.peak());
  row += ',' + format_double(e.impact.force_head.peak());
  row += ',' + kin_rel;
  row += ',' + force_rel;
  row += ',' + meta_rel;
  row += ',' + std::string(e.mirrored ? "1" : "0");
  return row;
}

}  // namespace

std::vector<DatasetEntry> generate_dataset(const GridSpec& grid,
                                           const SurrogateConfig& config,
                                           const fs::path& out_dir, int workers) {
  std::vector<DatasetEntry> entries = simulate_grid(grid, config, workers);

  fs::create_directories(out_dir / "kinematics");
  fs::create_directories(out_dir / "forces");
  fs::create_directories(out_dir / "meta");

  std::string manifest = kManifestHeader;
  manifest += '\n';
  for (const DatasetEntry& e : entries) {
    const std::string kin_rel = "kinematics/" + e.id + ".csv";
    const std::string force_rel = "forces/" + e.id + ".csv";
    const std::string meta_rel = "meta/" + e.id + ".json";
    io::write_kinematics_csv(out_dir / kin_rel, e.impact.series);
    io::write_forces_csv(out_dir / force_rel, e.impact.force_helmet, e.impact.force_head);
    io::write_text_file(out_dir / meta_rel, io::metadata_to_json(e, kin_rel, force_rel));
    manifest += manifest_row(e, kin_rel, force_rel, meta_rel);
    manifest += '\n';
  }
  io::write_text_file(out_dir / "manifest.csv", manifest);
  return entries;
}

std::vector<DatasetEntry> load_dataset(const fs::path& manifest_path) {
  require(fs::exists(manifest_path), ErrorCode::IoError,
          "manifest not found: " + manifest_path.string());
  const fs::path base = manifest_path.parent_path();
  const std::string text = io::read_text_file(manifest_path);

  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      std::size_t nl = text.find('\n', start);
      if (nl == std::string::npos) nl = text.size();
      std::string line = text.substr(start, nl - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) lines.push_back(std::move(line));
      start = nl + 1;
    }
  }
  require(!lines.empty(), ErrorCode::ParseError, "manifest is empty (missing header)");
  require(lines[0] == kManifestHeader, ErrorCode::ParseError,
          "manifest header mismatch in " + manifest_path.string());

  std::vector<DatasetEntry> entries;
  entries.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string context = manifest_path.string() + ": row " + std::to_string(r);
    const auto f = io::split_csv_line(lines[r]);
    require(f.size() == 15, ErrorCode::ParseError,
            context + ": expected 15 columns, got " + std::to_string(f.size()));

    DatasetEntry e;
    e.id = f[0];
    e.impact.setup.alpha_deg = io::parse_double(f[1], context);
    e.impact.setup.beta_deg = io::parse_double(f[2], context);
    e.impact.setup.y_mm = io::parse_double(f[3], context);
    e.impact.setup.z_mm = io::parse_double(f[4], context);
    e.impact.setup.speed_mps = io::parse_double(f[5], context);
    e.impact.location.theta_deg = io::parse_double(f[6], context);
    e.impact.location.eta_deg = io::parse_double(f[7], context);
    e.impact.region = region_from_name(f[8]);
    e.mirrored = f[14] == "1";

    const fs::path kin_path = base / f[11];
    const fs::path force_path = base / f[12];
    require(fs::exists(kin_path), ErrorCode::ParseError,
            context + ": missing kinematics file " + kin_path.string());
    require(fs::exists(force_path), ErrorCode::ParseError,
            context + ": missing forces file " + force_path.string());
    e.impact.series = io::read_kinematics_csv(kin_path);
    std::tie(e.impact.force_helmet, e.impact.force_head) = io::read_forces_csv(force_path);

    const fs::path meta_path = base / f[13];
    require(fs::exists(meta_path), ErrorCode::ParseError,
            context + ": missing metadata file " + meta_path.string());
    const auto meta = nlohmann::json::parse(io::read_text_file(meta_path), nullptr, false);
    require(!meta.is_discarded(), ErrorCode::ParseError,
            context + ": invalid JSON in " + meta_path.string());
    e.source_id = meta.value("source_id", e.id);

    e.impact.validate();
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace impact
