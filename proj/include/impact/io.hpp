#ifndef IMPACT_IO_HPP
#define IMPACT_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "impact/surrogate.hpp"
#include "impact/types.hpp"

namespace impact::io {

// Numbers are printed with std::to_chars (shortest round-trip form) and read
// with std::from_chars: locale-free, and byte-stable for identical inputs.
std::string format_double(double value);
double parse_double(const std::string& text, const std::string& context);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

std::vector<std::string> split_csv_line(const std::string& line);

// Kinematics CSV: header `t_ms,ax,ay,az,wx,wy,wz`, 145 rows, SI units.
std::string kinematics_to_csv(const KinematicSeries& series);
KinematicSeries kinematics_from_csv(const std::string& text, const std::string& context);
KinematicSeries read_kinematics_csv(const std::filesystem::path& path);
void write_kinematics_csv(const std::filesystem::path& path, const KinematicSeries& series);

// Force CSV: header `t_ms,f_helmet_kN,f_head_kN`, 145 rows.
std::string forces_to_csv(const ForceProfile& helmet, const ForceProfile& head);
std::pair<ForceProfile, ForceProfile> forces_from_csv(const std::string& text,
                                                      const std::string& context);
void write_forces_csv(const std::filesystem::path& path, const ForceProfile& helmet,
                      const ForceProfile& head);
std::pair<ForceProfile, ForceProfile> read_forces_csv(const std::filesystem::path& path);

// Feature tensor CSV: one header row with the 48 channel names, 145 rows.
std::string features_to_csv(const FeatureTensor& tensor);
FeatureTensor features_from_csv(const std::string& text, const std::string& context);

// Per-impact metadata JSON.
std::string metadata_to_json(const DatasetEntry& entry,
                             const std::string& kinematics_rel,
                             const std::string& forces_rel);

// Grid and surrogate config JSON. Each grid axis is either an explicit array
// or an object {"min": a, "max": b, "count": n} expanded to a linspace.
GridSpec grid_from_json(const std::string& text);
std::string grid_to_json(const GridSpec& grid);
SurrogateConfig surrogate_config_from_json(const std::string& text);
std::string surrogate_config_to_json(const SurrogateConfig& config);

}  // namespace impact::io

#endif  // IMPACT_IO_HPP
