#include "impact/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "impact/errors.hpp"

namespace impact::io {

using nlohmann::json;

std::string format_double(double value) {
  require(std::isfinite(value), ErrorCode::InvalidArgument,
          "refusing to serialize a non-finite number");
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& context) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, value);
  require(res.ec == std::errc() && res.ptr == end && std::isfinite(value),
          ErrorCode::ParseError, context + ": bad number '" + text + "'");
  return value;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  require(out.good(), ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

// Parses a CSV body with the given header into a rows x cols value table.
std::vector<std::vector<double>> parse_table(const std::string& text,
                                             const std::string& header,
                                             int expected_rows,
                                             const std::string& context) {
  const auto lines = split_lines(text);
  require(!lines.empty(), ErrorCode::ParseError, context + ": empty file");
  require(lines[0] == header, ErrorCode::ParseError,
          context + ": expected header '" + header + "', got '" + lines[0] + "'");
  const int rows = static_cast<int>(lines.size()) - 1;
  require(rows == expected_rows, ErrorCode::ParseError,
          context + ": expected " + std::to_string(expected_rows) + " data rows, got " +
              std::to_string(rows));
  const std::size_t cols = split_csv_line(header).size();
  std::vector<std::vector<double>> table;
  table.reserve(rows);
  for (int r = 0; r < rows; ++r) {
    const auto fields = split_csv_line(lines[r + 1]);
    require(fields.size() == cols, ErrorCode::ParseError,
            context + ": row " + std::to_string(r + 1) + " has " +
                std::to_string(fields.size()) + " columns, expected " +
                std::to_string(cols));
    std::vector<double> row(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = parse_double(fields[c], context + ": row " + std::to_string(r + 1));
    }
    table.push_back(std::move(row));
  }
  return table;
}

constexpr const char* kKinematicsHeader = "t_ms,ax,ay,az,wx,wy,wz";
constexpr const char* kForcesHeader = "t_ms,f_helmet_kN,f_head_kN";

}  // namespace

std::string kinematics_to_csv(const KinematicSeries& series) {
  series.validate();
  std::string out = kKinematicsHeader;
  out += '\n';
  for (int k = 0; k < kSamples; ++k) {
    out += std::to_string(k);
    for (int r = 0; r < 3; ++r) out += ',' + format_double(series.lin_acc(r, k));
    for (int r = 0; r < 3; ++r) out += ',' + format_double(series.ang_vel(r, k));
    out += '\n';
  }
  return out;
}

KinematicSeries kinematics_from_csv(const std::string& text, const std::string& context) {
  const auto table = parse_table(text, kKinematicsHeader, kSamples, context);
  KinematicSeries series = KinematicSeries::zeros(Frame::Anatomical);
  for (int k = 0; k < kSamples; ++k) {
    require(std::abs(table[k][0] - k) < 1e-9, ErrorCode::ParseError,
            context + ": row " + std::to_string(k + 1) + " has t_ms " +
                format_double(table[k][0]) + ", expected " + std::to_string(k));
    for (int r = 0; r < 3; ++r) series.lin_acc(r, k) = table[k][1 + r];
    for (int r = 0; r < 3; ++r) series.ang_vel(r, k) = table[k][4 + r];
  }
  series.validate();
  return series;
}

KinematicSeries read_kinematics_csv(const std::filesystem::path& path) {
  return kinematics_from_csv(read_text_file(path), path.string());
}

void write_kinematics_csv(const std::filesystem::path& path,
                          const KinematicSeries& series) {
  write_text_file(path, kinematics_to_csv(series));
}

std::string forces_to_csv(const ForceProfile& helmet, const ForceProfile& head) {
  helmet.validate();
  head.validate();
  std::string out = kForcesHeader;
  out += '\n';
  for (int k = 0; k < kSamples; ++k) {
    out += std::to_string(k);
    out += ',' + format_double(helmet.values_kN[k]);
    out += ',' + format_double(head.values_kN[k]);
    out += '\n';
  }
  return out;
}

std::pair<ForceProfile, ForceProfile> forces_from_csv(const std::string& text,
                                                      const std::string& context) {
  const auto table = parse_table(text, kForcesHeader, kSamples, context);
  ForceProfile helmet, head;
  for (int k = 0; k < kSamples; ++k) {
    helmet.values_kN[k] = table[k][1];
    head.values_kN[k] = table[k][2];
  }
  helmet.validate();
  head.validate();
  return {helmet, head};
}

void write_forces_csv(const std::filesystem::path& path, const ForceProfile& helmet,
                      const ForceProfile& head) {
  write_text_file(path, forces_to_csv(helmet, head));
}

std::pair<ForceProfile, ForceProfile> read_forces_csv(const std::filesystem::path& path) {
  return forces_from_csv(read_text_file(path), path.string());
}

std::string features_to_csv(const FeatureTensor& tensor) {
  const auto& names = channel_layout();
  std::string out;
  for (int c = 0; c < kFeatureChannels; ++c) {
    if (c > 0) out += ',';
    out += names[c];
  }
  out += '\n';
  for (int k = 0; k < kSamples; ++k) {
    for (int c = 0; c < kFeatureChannels; ++c) {
      if (c > 0) out += ',';
      out += format_double(tensor.data(k, c));
    }
    out += '\n';
  }
  return out;
}

FeatureTensor features_from_csv(const std::string& text, const std::string& context) {
  const auto& names = channel_layout();
  std::string header;
  for (int c = 0; c < kFeatureChannels; ++c) {
    if (c > 0) header += ',';
    header += names[c];
  }
  const auto table = parse_table(text, header, kSamples, context);
  FeatureTensor tensor = FeatureTensor::zeros();
  for (int k = 0; k < kSamples; ++k)
    for (int c = 0; c < kFeatureChannels; ++c) tensor.data(k, c) = table[k][c];
  return tensor;
}

std::string metadata_to_json(const DatasetEntry& entry, const std::string& kinematics_rel,
                             const std::string& forces_rel) {
  json j;
  j["schema_version"] = 1;
  j["id"] = entry.id;
  j["source_id"] = entry.source_id;
  j["mirrored"] = entry.mirrored;
  j["setup"] = {{"alpha_deg", entry.impact.setup.alpha_deg},
                {"beta_deg", entry.impact.setup.beta_deg},
                {"y_mm", entry.impact.setup.y_mm},
                {"z_mm", entry.impact.setup.z_mm},
                {"speed_mps", entry.impact.setup.speed_mps}};
  j["location"] = {{"theta_deg", entry.impact.location.theta_deg},
                   {"eta_deg", entry.impact.location.eta_deg},
                   {"region", region_name(entry.impact.region)}};
  j["peak_force_helmet_kN"] = entry.impact.force_helmet.peak();
  j["peak_force_head_kN"] = entry.impact.force_head.peak();
  j["files"] = {{"kinematics", kinematics_rel}, {"forces", forces_rel}};
  return j.dump(2) + "\n";
}

namespace {

std::vector<double> axis_from_json(const json& j, const std::string& name) {
  require(j.contains(name), ErrorCode::ParseError, "grid spec missing axis " + name);
  const json& axis = j.at(name);
  std::vector<double> values;
  if (axis.is_array()) {
    for (const auto& v : axis) {
      require(v.is_number(), ErrorCode::ParseError, "grid axis " + name + " must be numeric");
      values.push_back(v.get<double>());
    }
  } else if (axis.is_object()) {
    const double lo = axis.at("min").get<double>();
    const double hi = axis.at("max").get<double>();
    const int count = axis.at("count").get<int>();
    require(count >= 1, ErrorCode::ParseError, "grid axis " + name + " count must be >= 1");
    for (int i = 0; i < count; ++i) {
      values.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    }
  } else {
    fail(ErrorCode::ParseError, "grid axis " + name + " must be an array or {min,max,count}");
  }
  require(!values.empty(), ErrorCode::ParseError, "grid axis " + name + " is empty");
  return values;
}

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), ErrorCode::ParseError, "invalid JSON in " + what);
  return j;
}

}  // namespace

GridSpec grid_from_json(const std::string& text) {
  const json j = parse_json(text, "grid spec");
  GridSpec grid;
  grid.alpha_deg = axis_from_json(j, "alpha_deg");
  grid.beta_deg = axis_from_json(j, "beta_deg");
  grid.y_mm = axis_from_json(j, "y_mm");
  grid.z_mm = axis_from_json(j, "z_mm");
  grid.speed_mps = axis_from_json(j, "speed_mps");
  return grid;
}

std::string grid_to_json(const GridSpec& grid) {
  json j;
  j["alpha_deg"] = grid.alpha_deg;
  j["beta_deg"] = grid.beta_deg;
  j["y_mm"] = grid.y_mm;
  j["z_mm"] = grid.z_mm;
  j["speed_mps"] = grid.speed_mps;
  return j.dump(2) + "\n";
}

SurrogateConfig surrogate_config_from_json(const std::string& text) {
  const json j = parse_json(text, "surrogate config");
  SurrogateConfig cfg;
  const auto get = [&](const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
  };
  cfg.impactor_mass_kg = get("impactor_mass_kg", cfg.impactor_mass_kg);
  cfg.contact_stiffness = get("contact_stiffness", cfg.contact_stiffness);
  cfg.contact_damping = get("contact_damping", cfg.contact_damping);
  cfg.contact_exponent = get("contact_exponent", cfg.contact_exponent);
  cfg.neck_translational_stiffness =
      get("neck_translational_stiffness", cfg.neck_translational_stiffness);
  cfg.neck_translational_damping =
      get("neck_translational_damping", cfg.neck_translational_damping);
  cfg.neck_rotational_stiffness =
      get("neck_rotational_stiffness", cfg.neck_rotational_stiffness);
  cfg.neck_rotational_damping =
      get("neck_rotational_damping", cfg.neck_rotational_damping);
  cfg.transmission_factor = get("transmission_factor", cfg.transmission_factor);
  cfg.integration_dt = get("integration_dt", cfg.integration_dt);
  cfg.output_dt = get("output_dt", cfg.output_dt);
  cfg.duration = get("duration", cfg.duration);
  cfg.head.mass_kg = get("head_mass_kg", cfg.head.mass_kg);
  if (j.contains("head_inertia")) {
    const auto inertia = j.at("head_inertia").get<std::vector<double>>();
    require(inertia.size() == 3, ErrorCode::ParseError,
            "head_inertia must list the three principal moments");
    cfg.head.inertia =
        Eigen::Vector3d(inertia[0], inertia[1], inertia[2]).asDiagonal();
  }
  cfg.validate();
  return cfg;
}

std::string surrogate_config_to_json(const SurrogateConfig& cfg) {
  json j;
  j["impactor_mass_kg"] = cfg.impactor_mass_kg;
  j["contact_stiffness"] = cfg.contact_stiffness;
  j["contact_damping"] = cfg.contact_damping;
  j["contact_exponent"] = cfg.contact_exponent;
  j["neck_translational_stiffness"] = cfg.neck_translational_stiffness;
  j["neck_translational_damping"] = cfg.neck_translational_damping;
  j["neck_rotational_stiffness"] = cfg.neck_rotational_stiffness;
  j["neck_rotational_damping"] = cfg.neck_rotational_damping;
  j["transmission_factor"] = cfg.transmission_factor;
  j["integration_dt"] = cfg.integration_dt;
  j["output_dt"] = cfg.output_dt;
  j["duration"] = cfg.duration;
  j["head_mass_kg"] = cfg.head.mass_kg;
  j["head_inertia"] = {cfg.head.inertia(0, 0), cfg.head.inertia(1, 1),
                       cfg.head.inertia(2, 2)};
  return j.dump(2) + "\n";
}

}  // namespace impact::io
