#include "coxstaff/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace coxstaff {

void ModelSpec::validate() const {
  pattern.validate();
  params.validate();
  check_lag_fits(pattern, params);
}

json model_to_json(const ModelSpec& model) {
  json doc;
  doc["delta"] = model.pattern.delta;
  doc["rates"] = std::vector<double>(model.pattern.rates.begin(), model.pattern.rates.end());
  doc["alpha"] = model.params.alpha;
  doc["lag"] = model.params.lag;
  doc["var_w"] = model.params.var_w;
  doc["w_dist"] = std::string(to_string(model.params.w_dist));
  return doc;
}

ModelSpec model_from_json(const json& doc) {
  try {
    ModelSpec model;
    model.pattern.delta = doc.at("delta").get<double>();
    const auto rates = doc.at("rates").get<std::vector<double>>();
    model.pattern.rates = Eigen::Map<const Eigen::VectorXd>(rates.data(), static_cast<Eigen::Index>(rates.size()));
    model.params.alpha = doc.at("alpha").get<double>();
    model.params.lag = doc.at("lag").get<int>();
    model.params.var_w = doc.at("var_w").get<double>();
    model.params.w_dist = doc.contains("w_dist")
                              ? parse_w_distribution(doc.at("w_dist").get<std::string>())
                              : (model.params.var_w == 0.0 ? WDistribution::deterministic : WDistribution::gamma);
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw DomainError(std::string("malformed model document: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

ModelSpec read_model(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DomainError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

void write_moments_csv(std::ostream& out, const MomentCurve& curve) {
  out << "slot,m_inf,v_inf\n";
  for (Eigen::Index n = 0; n < curve.n_slots(); ++n)
    out << n << ',' << format_double(curve.m_inf[n]) << ',' << format_double(curve.v_inf[n]) << '\n';
}

void write_schedule_csv(std::ostream& out, const StaffingSchedule& schedule) {
  out << "slot,servers\n";
  for (std::size_t n = 0; n < schedule.levels.size(); ++n) out << n << ',' << schedule.levels[n] << '\n';
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, const std::string& what) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw DomainError("malformed number '" + cell + "' in " + what);
  return value;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

StaffingSchedule read_schedule_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"slot", "servers"})
    throw DomainError("schedule CSV must start with header 'slot,servers'");
  StaffingSchedule s;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw DomainError("schedule CSV rows need exactly two fields");
    const double slot = parse_number(cells[0], "schedule slot");
    if (slot != static_cast<double>(s.levels.size())) throw DomainError("schedule slots must be 0, 1, 2, ...");
    const double servers = parse_number(cells[1], "schedule servers");
    if (servers < 0 || servers != std::floor(servers)) throw DomainError("servers must be nonnegative integers");
    s.levels.push_back(static_cast<int>(servers));
  }
  if (s.levels.empty()) throw DomainError("schedule CSV has no rows");
  return s;
}

json schedule_metadata(const StaffingSchedule& schedule) {
  json doc;
  doc["epsilon"] = schedule.epsilon ? json(*schedule.epsilon) : json(nullptr);
  doc["beta"] = schedule.beta;
  doc["rule"] = std::string(to_string(schedule.rule));
  doc["gamma"] = schedule.gamma ? json(*schedule.gamma) : json(nullptr);
  doc["total"] = schedule.total();
  return doc;
}

ArrivalCounts read_counts_csv(std::istream& in, double delta) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("counts CSV is empty");
  const auto header = split_csv_line(line);
  if (header.empty()) throw DomainError("counts CSV header is empty");
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] != "slot_" + std::to_string(j))
      throw DomainError("counts CSV header must read slot_0,...,slot_{N-1}; column " + std::to_string(j) +
                        " is '" + header[j] + "'");

  std::vector<std::vector<double>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DomainError("counts CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " fields, expected " + std::to_string(header.size()));
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_number(c, "counts line " + std::to_string(line_no)));
    rows.push_back(std::move(row));
  }

  ArrivalCounts counts;
  counts.delta = delta;
  counts.counts.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < header.size(); ++j)
      counts.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  counts.validate();
  return counts;
}

json fit_results_json(std::span<const FitResult> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json rec;
    rec["lag"] = r.lag ? json(*r.lag) : json(nullptr);
    rec["alpha"] = r.alpha ? json(*r.alpha) : json(nullptr);
    rec["var_w"] = r.var_w;
    rec["mse_star"] = r.mse_star ? json(*r.mse_star) : json(nullptr);
    rec["mse"] = r.mse;
    rec["gain"] = r.gain;
    out.push_back(rec);
  }
  return out;
}

namespace {

json vector_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(std::isfinite(v[i]) ? json(v[i]) : json(nullptr));
  return arr;
}

}  // namespace

json simulation_to_json(const SimulationResult& r) {
  json doc;
  doc["delay_prob"] = vector_json(r.delay_prob);
  doc["delay_prob_se"] = vector_json(r.delay_prob_se);
  doc["exceedance_prob"] = vector_json(r.exceedance_prob);
  doc["occupancy_mean"] = vector_json(r.occupancy_mean);
  doc["occupancy_var"] = vector_json(r.occupancy_var);
  doc["system_occupancy_mean"] = vector_json(r.system_mean);
  doc["system_occupancy_var"] = vector_json(r.system_var);
  doc["counts"] = vector_json(r.arrivals);
  doc["overall_delay_prob"] = std::isfinite(r.overall_delay_prob) ? json(r.overall_delay_prob) : json(nullptr);
  doc["abandon_frac"] = r.abandon_frac;
  doc["totals"] = {{"arrivals", r.total_arrivals},
                   {"served", r.total_served},
                   {"abandoned", r.total_abandoned},
                   {"in_system", r.total_in_system}};
  doc["seed"] = r.seed;
  doc["n_replications"] = r.n_replications;
  doc["horizon_days"] = r.horizon_days;
  return doc;
}

void write_simulation_csv(std::ostream& out, const SimulationResult& r) {
  out << "slot,delay_prob,exceedance_prob,occ_mean,occ_var\n";
  for (Eigen::Index n = 0; n < r.delay_prob.size(); ++n) {
    out << n << ',' << (std::isfinite(r.delay_prob[n]) ? format_double(r.delay_prob[n]) : "") << ','
        << format_double(r.exceedance_prob[n]) << ',' << format_double(r.occupancy_mean[n]) << ','
        << format_double(r.occupancy_var[n]) << '\n';
  }
}

json delay_summary_json(const DelaySummary& s) {
  return {{"max_delay", s.max_delay},
          {"mean_delay", s.mean_delay},
          {"std_delay", s.std_delay},
          {"slots_violating", s.slots_violating}};
}

ServiceSpec read_survival_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"t", "survival"})
    throw DomainError("survival CSV must start with header 't,survival'");
  std::vector<double> t, s;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw DomainError("survival CSV rows need exactly two fields");
    t.push_back(parse_number(cells[0], "survival grid"));
    s.push_back(parse_number(cells[1], "survival value"));
  }
  return ServiceSpec::tabulated(Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size())),
                                Eigen::Map<Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())));
}

}  // namespace coxstaff
