#include "tslam/io.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace tslam {

namespace {

using nlohmann::json;

json vec2_json(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }
json vec3_json(const Eigen::Vector3d& v) {
  return json::array({v.x(), v.y(), v.z()});
}
json pose_json(const Pose2& p) { return json::array({p.x(), p.y(), p.theta()}); }

/// Strict object view: every key must be consumed exactly once.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string scope)
      : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object())
      throw ConfigError("'" + scope_ + "' must be a JSON object");
  }

  bool has(const char* key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  const json& raw(const char* key) { return j_.at(key); }

  void read(const char* key, double* out) { fetch(key, out, "a number"); }
  void read(const char* key, int* out) { fetch(key, out, "an integer"); }
  void read(const char* key, bool* out) { fetch(key, out, "a boolean"); }
  void read(const char* key, std::uint64_t* out) {
    fetch(key, out, "an unsigned integer");
  }
  void read(const char* key, std::string* out) { fetch(key, out, "a string"); }

  void read(const char* key, Eigen::Vector2d* out) { read_array(key, out, 2); }
  void read(const char* key, Eigen::Vector3d* out) { read_array(key, out, 3); }

  void read(const char* key, Pose2* out) {
    Eigen::Vector3d v(out->x(), out->y(), out->theta());
    read_array(key, &v, 3);
    *out = Pose2(v.x(), v.y(), v.z());
  }

  void done() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ConfigError("unknown key '" + scoped(item.key()) + "'");
  }

  std::string scoped(const std::string& key) const {
    return scope_.empty() ? key : scope_ + "." + key;
  }

 private:
  template <typename T>
  void fetch(const char* key, T* out, const char* expected) {
    if (!has(key)) return;
    try {
      *out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("key '" + scoped(key) + "' must be " + expected);
    }
  }

  template <typename V>
  void read_array(const char* key, V* out, int n) {
    if (!has(key)) return;
    const json& a = j_.at(key);
    if (!a.is_array() || static_cast<int>(a.size()) != n)
      throw ConfigError("key '" + scoped(key) + "' must be an array of " +
                        std::to_string(n) + " numbers");
    for (int i = 0; i < n; ++i) {
      if (!a[i].is_number())
        throw ConfigError("key '" + scoped(key) + "' must be an array of " +
                          std::to_string(n) + " numbers");
      (*out)(i) = a[i].get<double>();
    }
  }

  const json& j_;
  std::string scope_;
  std::set<std::string> seen_;
};

json shape_to_json(const GroundTruthShape& shape) {
  json j;
  switch (shape.kind()) {
    case GroundTruthShape::Kind::kSquare: {
      const double half = shape.vertices().front().x();
      j["kind"] = "square";
      j["side_m"] = 2.0 * std::abs(half);
      break;
    }
    case GroundTruthShape::Kind::kRegularPolygon:
      j["kind"] = "polygon";
      j["sides"] = static_cast<int>(shape.vertices().size());
      j["circumradius_m"] = shape.vertices().front().norm();
      break;
    case GroundTruthShape::Kind::kEllipse:
      j["kind"] = "ellipse";
      j["major_axis_m"] = 2.0 * shape.semi_major();
      j["minor_axis_m"] = 2.0 * shape.semi_minor();
      break;
  }
  return j;
}

GroundTruthShape shape_from_json(const json& j, const std::string& scope) {
  ObjectReader r(j, scope);
  std::string kind;
  r.read("kind", &kind);
  if (kind == "square") {
    double side = 0.09;
    r.read("side_m", &side);
    r.done();
    return GroundTruthShape::square(side);
  }
  if (kind == "polygon") {
    int sides = 6;
    double circumradius = 0.0605;
    r.read("sides", &sides);
    r.read("circumradius_m", &circumradius);
    r.done();
    return GroundTruthShape::regular_polygon(sides, circumradius);
  }
  if (kind == "ellipse") {
    double major = 0.1309, minor = 0.09;
    r.read("major_axis_m", &major);
    r.read("minor_axis_m", &minor);
    r.done();
    return GroundTruthShape::ellipse(major, minor);
  }
  throw ConfigError("key '" + scope + ".kind' must be one of square, polygon, "
                    "ellipse");
}

std::string preset_name_for(const GroundTruthShape& shape) {
  for (const char* name : {"rect1", "hex", "ellip2"}) {
    const GroundTruthShape preset = shape_preset(name);
    if (shape_to_json(preset) == shape_to_json(shape)) return name;
  }
  return "custom";
}

json trial_to_json(const TrialConfig& c) {
  json j;
  j["shape"] = shape_to_json(c.shape);
  j["fingers"] = c.fingers;
  j["probe_radius_m"] = c.probe_radius;
  j["finger_spacing_m"] = c.finger_spacing;
  j["speed_mps"] = c.speed;
  j["dt_s"] = c.dt;
  j["steps"] = c.steps;
  j["noise_pos_std_m"] = c.noise_pos_std;
  j["noise_force_std_n"] = c.noise_force_std;
  j["contact_threshold_n"] = c.contact_threshold;
  j["follow_gain"] = c.follow_gain;
  j["perturbation_m_m_rad"] = vec3_json(c.perturbation);
  j["reloc_count"] = c.reloc_count;
  j["reloc_noise_m_m_rad"] = vec3_json(c.reloc_noise);
  j["mu"] = c.mu;
  j["twist_jitter"] = c.twist_jitter;
  j["c_ratio_override_m"] = c.c_ratio_override;
  j["seed"] = c.seed;
  return j;
}

TrialConfig trial_from_json(const json& j, const std::string& scope) {
  TrialConfig c;
  ObjectReader r(j, scope);
  if (r.has("shape")) {
    const json& s = r.raw("shape");
    if (s.is_string()) {
      c.shape_name = s.get<std::string>();
      c.shape = shape_preset(c.shape_name);
    } else {
      c.shape = shape_from_json(s, r.scoped("shape"));
      c.shape_name = preset_name_for(c.shape);
    }
  }
  r.read("fingers", &c.fingers);
  r.read("probe_radius_m", &c.probe_radius);
  r.read("finger_spacing_m", &c.finger_spacing);
  r.read("speed_mps", &c.speed);
  r.read("dt_s", &c.dt);
  r.read("steps", &c.steps);
  r.read("noise_pos_std_m", &c.noise_pos_std);
  r.read("noise_force_std_n", &c.noise_force_std);
  r.read("contact_threshold_n", &c.contact_threshold);
  r.read("follow_gain", &c.follow_gain);
  r.read("perturbation_m_m_rad", &c.perturbation);
  r.read("reloc_count", &c.reloc_count);
  r.read("reloc_noise_m_m_rad", &c.reloc_noise);
  r.read("mu", &c.mu);
  r.read("twist_jitter", &c.twist_jitter);
  r.read("c_ratio_override_m", &c.c_ratio_override);
  r.read("seed", &c.seed);
  r.done();
  return c;
}

json gpis_to_json(const GpisConfig& c) {
  json j;
  j["kernel_scale_m"] = c.kernel_scale_r;
  j["noise_variance_sdf_m2"] = c.noise_variance_sdf;
  j["noise_variance_grad"] = c.noise_variance_grad;
  j["prior_circle_radius_m"] = c.prior_circle_radius;
  j["prior_point_count"] = c.prior_point_count;
  j["variance_threshold"] = c.variance_threshold;
  j["grid_resolution_m"] = c.grid_resolution;
  j["grid_half_extent_m"] = c.grid_half_extent;
  j["local_gp_grid"] = c.local_gp_grid;
  j["local_radius_factor"] = c.local_radius_factor;
  return j;
}

GpisConfig gpis_from_json(const json& j, const std::string& scope) {
  GpisConfig c;
  ObjectReader r(j, scope);
  r.read("kernel_scale_m", &c.kernel_scale_r);
  r.read("noise_variance_sdf_m2", &c.noise_variance_sdf);
  r.read("noise_variance_grad", &c.noise_variance_grad);
  r.read("prior_circle_radius_m", &c.prior_circle_radius);
  r.read("prior_point_count", &c.prior_point_count);
  r.read("variance_threshold", &c.variance_threshold);
  r.read("grid_resolution_m", &c.grid_resolution);
  r.read("grid_half_extent_m", &c.grid_half_extent);
  r.read("local_gp_grid", &c.local_gp_grid);
  r.read("local_radius_factor", &c.local_radius_factor);
  r.done();
  return c;
}

json graph_to_json(const GraphConfig& c) {
  json j;
  j["sigma_push_m"] = vec2_json(c.sigma_push);
  j["sigma_contact_m"] = vec3_json(c.sigma_contact);
  j["sigma_nonpen_m"] = c.sigma_nonpen;
  j["sigma_smooth_m_m_rad"] = vec3_json(c.sigma_smooth);
  j["sigma_prior_m_m_rad"] = vec3_json(c.sigma_prior);
  j["sigma_c_ratio_m"] = c.sigma_c_ratio;
  j["sigma_reloc_m_m_rad"] = vec3_json(c.sigma_reloc);
  j["prior_mean_m_m_rad"] = pose_json(c.prior_mean);
  j["c_ratio_init_m"] = c.c_ratio_init;
  j["probe_radius_m"] = c.probe_radius;
  j["eps_tau_nm"] = c.eps_tau;
  j["nonpen_samples"] = c.nonpen_samples;
  j["lag"] = c.lag;
  j["max_iterations"] = c.max_iterations;
  j["relative_decrease_tol"] = c.relative_decrease_tol;
  j["fd_step"] = c.fd_step;
  return j;
}

GraphConfig graph_from_json(const json& j, const std::string& scope) {
  GraphConfig c;
  ObjectReader r(j, scope);
  r.read("sigma_push_m", &c.sigma_push);
  r.read("sigma_contact_m", &c.sigma_contact);
  r.read("sigma_nonpen_m", &c.sigma_nonpen);
  r.read("sigma_smooth_m_m_rad", &c.sigma_smooth);
  r.read("sigma_prior_m_m_rad", &c.sigma_prior);
  r.read("sigma_c_ratio_m", &c.sigma_c_ratio);
  r.read("sigma_reloc_m_m_rad", &c.sigma_reloc);
  r.read("prior_mean_m_m_rad", &c.prior_mean);
  r.read("c_ratio_init_m", &c.c_ratio_init);
  r.read("probe_radius_m", &c.probe_radius);
  r.read("eps_tau_nm", &c.eps_tau);
  r.read("nonpen_samples", &c.nonpen_samples);
  r.read("lag", &c.lag);
  r.read("max_iterations", &c.max_iterations);
  r.read("relative_decrease_tol", &c.relative_decrease_tol);
  r.read("fd_step", &c.fd_step);
  r.done();
  return c;
}

json slam_to_json(const SlamConfig& c) {
  json j;
  j["gpis"] = gpis_to_json(c.gpis);
  j["graph"] = graph_to_json(c.graph);
  j["gpis_update_period"] = c.gpis_update_period;
  j["contour_update_period"] = c.contour_update_period;
  j["two_worker"] = c.two_worker;
  return j;
}

SlamConfig slam_from_json(const json& j, const std::string& scope) {
  SlamConfig c;
  ObjectReader r(j, scope);
  if (r.has("gpis")) c.gpis = gpis_from_json(r.raw("gpis"), r.scoped("gpis"));
  if (r.has("graph"))
    c.graph = graph_from_json(r.raw("graph"), r.scoped("graph"));
  r.read("gpis_update_period", &c.gpis_update_period);
  r.read("contour_update_period", &c.contour_update_period);
  r.read("two_worker", &c.two_worker);
  r.done();
  return c;
}

json parse_line(const std::string& text, int line) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed JSON: ") + e.what(), line);
  }
}

double num_field(const json& j, const char* key, int line) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw DataError(std::string("missing numeric field '") + key + "'", line);
  return j.at(key).get<double>();
}

Eigen::Vector3d vec3_field(const json& j, const char* key, int line) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 3)
    throw DataError(std::string("field '") + key + "' must be [x, y, theta]",
                    line);
  const json& a = j.at(key);
  for (int i = 0; i < 3; ++i)
    if (!a[i].is_number())
      throw DataError(std::string("field '") + key + "' must be numeric", line);
  return Eigen::Vector3d(a[0].get<double>(), a[1].get<double>(),
                         a[2].get<double>());
}

Eigen::Vector2d vec2_field(const json& j, const char* key, int line) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 2)
    throw DataError(std::string("field '") + key + "' must be [x, y]", line);
  const json& a = j.at(key);
  for (int i = 0; i < 2; ++i)
    if (!a[i].is_number())
      throw DataError(std::string("field '") + key + "' must be numeric", line);
  return Eigen::Vector2d(a[0].get<double>(), a[1].get<double>());
}

}  // namespace

GroundTruthShape shape_preset(const std::string& name) {
  if (name == "rect1") return GroundTruthShape::square(0.09);
  if (name == "hex") return GroundTruthShape::regular_polygon(6, 0.0605);
  if (name == "ellip2") return GroundTruthShape::ellipse(0.1309, 0.09);
  throw ConfigError("unknown shape preset '" + name +
                    "' (expected rect1, hex, or ellip2)");
}

bool is_shape_preset(const std::string& name) {
  return name == "rect1" || name == "hex" || name == "ellip2";
}

AppConfig parse_config(const nlohmann::json& j) {
  AppConfig c;
  ObjectReader r(j, "");
  if (r.has("trial")) c.trial = trial_from_json(r.raw("trial"), "trial");
  if (r.has("slam")) c.slam = slam_from_json(r.raw("slam"), "slam");
  r.done();
  return c;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

nlohmann::json config_to_json(const AppConfig& config) {
  json j;
  j["trial"] = trial_to_json(config.trial);
  j["slam"] = slam_to_json(config.slam);
  return j;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (const char ch : bytes) {
    hash ^= static_cast<unsigned char>(ch);
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string config_digest(const AppConfig& config) {
  const std::uint64_t hash = fnv1a64(config_to_json(config).dump());
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

void write_trial_log(const TrialLog& log, std::ostream& out) {
  json header;
  header["config"] = trial_to_json(log.config);
  header["true_c_m"] = log.true_c_ratio;
  out << header.dump() << "\n";
  for (const TrialStep& s : log.steps) {
    json row;
    row["t"] = s.t;
    row["p"] = vec2_json(s.z.pusher_pos);
    row["f"] = vec2_json(s.z.force);
    row["theta"] = s.z.contact ? 1 : 0;
    row["gt"] = pose_json(s.gt);
    row["reloc"] = s.reloc ? pose_json(*s.reloc) : json(nullptr);
    out << row.dump() << "\n";
  }
}

void write_trial_log_file(const TrialLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing", 0);
  write_trial_log(log, out);
}

TrialLog read_trial_log(std::istream& in) {
  TrialLog log;
  std::string text;
  int line = 0;

  if (!std::getline(in, text)) throw DataError("empty trial log", 1);
  ++line;
  const json header = parse_line(text, line);
  if (!header.is_object() || !header.contains("config"))
    throw DataError("header must carry the trial config", line);
  log.config = trial_from_json(header.at("config"), "config");
  log.true_c_ratio = num_field(header, "true_c_m", line);

  int expected_t = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    const json row = parse_line(text, line);
    TrialStep s;
    s.t = static_cast<int>(num_field(row, "t", line));
    if (s.t != expected_t++)
      throw DataError("timestep out of order", line);
    s.z.pusher_pos = vec2_field(row, "p", line);
    s.z.force = vec2_field(row, "f", line);
    s.z.contact = num_field(row, "theta", line) != 0.0;
    const Eigen::Vector3d g = vec3_field(row, "gt", line);
    s.gt = Pose2(g.x(), g.y(), g.z());
    if (row.contains("reloc") && !row.at("reloc").is_null()) {
      const Eigen::Vector3d rl = vec3_field(row, "reloc", line);
      s.reloc = Pose2(rl.x(), rl.y(), rl.z());
    }
    log.steps.push_back(std::move(s));
  }
  if (log.steps.empty()) throw DataError("trial log has no step rows", line);
  return log;
}

TrialLog read_trial_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trial log '" + path + "'", 0);
  return read_trial_log(in);
}

void write_estimates(const RunResult& run, std::ostream& out) {
  for (std::size_t t = 0; t < run.steps.size(); ++t) {
    const StepResult& s = run.steps[t];
    json row;
    row["t"] = static_cast<int>(t);
    row["est"] = pose_json(s.pose);
    row["contour_version"] = s.contour_version;
    row["ms"] = s.wall_ms;
    out << row.dump() << "\n";
  }
}

nlohmann::json report_to_json(const EvalReport& report) {
  json j;
  j["trans_rmse_m"] = report.trans_rmse;
  j["rot_rmse_rad"] = report.rot_rmse;
  j["final_mhd_m"] = report.final_mhd;
  j["mhd_series_m"] = report.mhd_series;
  j["timing_ms"] = report.timing_ms;
  return j;
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "series,index,value\n";
  for (std::size_t i = 0; i < report.mhd_series.size(); ++i)
    out << "mhd_m," << i << "," << report.mhd_series[i] << "\n";
  for (std::size_t i = 0; i < report.timing_ms.size(); ++i)
    out << "timing_ms," << i << "," << report.timing_ms[i] << "\n";
}

nlohmann::json manifest_to_json(const RunManifest& manifest) {
  json j;
  j["command"] = manifest.command;
  j["config_digest"] = manifest.config_digest;
  j["seed"] = manifest.seed;
  j["artifacts"] = manifest.artifacts;
  j["version"] = manifest.version;
  return j;
}

}  // namespace tslam
