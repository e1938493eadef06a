#include "progmoe/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "progmoe/csv.hpp"
#include "progmoe/error.hpp"

namespace progmoe {

using nlohmann::json;

// ---------------------------------------------------------- normalized cohort

Cohort read_cohort_jsonl(std::istream& in) {
  Cohort cohort;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "cohort line " + std::to_string(number);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, where + ": " + e.what());
    }
    try {
      Subject s;
      s.id = j.at("id").get<std::string>();
      s.gaps = j.at("gaps").get<std::vector<double>>();
      const auto rows = j.at("obs").get<std::vector<std::vector<double>>>();
      const auto cols = rows.empty() ? 0 : rows.front().size();
      s.observations.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw Error(ErrorKind::ParseError, where + ": ragged observation rows");
        for (std::size_t c = 0; c < cols; ++c) {
          s.observations(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
      }
      s.validate(s.observations.cols());
      cohort.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, where + ": " + e.what());
    }
  }
  return cohort;
}

Cohort load_cohort(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open cohort '" + path + "'");
  return read_cohort_jsonl(in);
}

void write_cohort_jsonl(std::ostream& out, const Cohort& cohort) {
  for (const auto& s : cohort) {
    json obs = json::array();
    for (Eigen::Index r = 0; r < s.observations.rows(); ++r) {
      std::vector<double> row(s.observations.cols());
      for (Eigen::Index c = 0; c < s.observations.cols(); ++c) row[static_cast<std::size_t>(c)] = s.observations(r, c);
      obs.push_back(row);
    }
    json j = {{"id", s.id}, {"gaps", s.gaps}, {"obs", obs}};
    out << j.dump() << "\n";
  }
}

void save_cohort(const std::string& path, const Cohort& cohort) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write cohort '" + path + "'");
  write_cohort_jsonl(out, cohort);
}

// ---------------------------------------------------------------- raw cohort

long days_from_iso_date(const std::string& date) {
  auto bad = [&date]() { return Error(ErrorKind::ParseError, "invalid ISO-8601 date '" + date + "'"); };
  if (date.size() < 10 || date[4] != '-' || date[7] != '-') throw bad();
  if (date.size() > 10 && date[10] != 'T' && date[10] != ' ') throw bad();
  auto field = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(date.data() + pos, date.data() + pos + len, v);
    if (ec != std::errc{} || ptr != date.data() + pos + len) throw bad();
    return v;
  };
  const int y = field(0, 4);
  const int m = field(5, 2);
  const int d = field(8, 2);
  static constexpr int month_days[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  if (m < 1 || m > 12 || d < 1 || d > month_days[m - 1] || (m == 2 && d == 29 && !leap)) throw bad();
  // Civil-to-days conversion over the proleptic Gregorian calendar.
  const int yy = y - (m <= 2 ? 1 : 0);
  const long era = (yy >= 0 ? yy : yy - 399) / 400;
  const long yoe = yy - era * 400;
  const long doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

RawCohort read_raw_cohort_csv(std::istream& in) {
  std::string line;
  if (!csv::next_line(in, line)) throw Error(ErrorKind::ParseError, "raw cohort: empty file");
  const auto header = csv::split_line(line);
  if (header.size() < 3 || header[0] != "subject_id" || header[1] != "scan_date") {
    throw Error(ErrorKind::ParseError, "raw cohort: header must be subject_id,scan_date,<regions...>");
  }
  RawCohort raw;
  raw.region_names.assign(header.begin() + 2, header.end());
  const std::size_t n = raw.region_names.size();

  struct Row {
    long day;
    std::string date;
    std::vector<double> values;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  int number = 1;
  while (csv::next_line(in, line)) {
    ++number;
    const auto fields = csv::split_line(line);
    const std::string where = "raw cohort row " + std::to_string(number);
    if (fields.size() != n + 2) {
      throw Error(ErrorKind::ParseError, where + ": expected " + std::to_string(n + 2) + " fields");
    }
    Row r{days_from_iso_date(fields[1]), fields[1], {}};
    for (std::size_t c = 0; c < n; ++c) r.values.push_back(csv::parse_double(fields[c + 2], where));
    if (!rows.count(fields[0])) order.push_back(fields[0]);
    rows[fields[0]].push_back(std::move(r));
  }
  for (const auto& id : order) {
    auto& list = rows[id];
    std::stable_sort(list.begin(), list.end(), [](const Row& a, const Row& b) { return a.day < b.day; });
    RawSubject s;
    s.id = id;
    s.values.resize(static_cast<Eigen::Index>(list.size()), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (k > 0 && list[k].day == list[k - 1].day) {
        throw Error(ErrorKind::InvalidSubject, "subject '" + id + "' has two scans on " + list[k].date);
      }
      s.dates.push_back(list[k].date);
      for (std::size_t c = 0; c < n; ++c) {
        s.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = list[k].values[c];
      }
    }
    raw.subjects.push_back(std::move(s));
  }
  return raw;
}

RawCohort load_raw_cohort(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open raw cohort '" + path + "'");
  return read_raw_cohort_csv(in);
}

Cohort normalize_with(const RawCohort& raw, const NormalizationConstants& k) {
  const double span = k.max - k.min;
  if (!(span > 0.0)) throw Error(ErrorKind::DegenerateRange, "normalization range is empty");
  Cohort out;
  for (const auto& rs : raw.subjects) {
    Subject s;
    s.id = rs.id;
    const long day0 = days_from_iso_date(rs.dates.front());
    for (const auto& d : rs.dates) s.gaps.push_back(static_cast<double>(days_from_iso_date(d) - day0) / 365.25);
    s.observations = ((rs.values.array() - k.min) / span).matrix();
    out.push_back(std::move(s));
  }
  return out;
}

NormalizedCohort normalize(const RawCohort& raw) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : raw.subjects) {
    if (!s.values.allFinite()) throw Error(ErrorKind::NonFiniteInput, "subject '" + s.id + "' has non-finite values");
    if (s.values.size() == 0) continue;
    lo = std::min(lo, s.values.minCoeff());
    hi = std::max(hi, s.values.maxCoeff());
  }
  if (!(hi > lo)) throw Error(ErrorKind::DegenerateRange, "fewer than two distinct values in the raw cohort");
  NormalizedCohort out;
  out.constants = {lo, hi};
  out.cohort = normalize_with(raw, out.constants);
  return out;
}

Eigen::MatrixXd denormalize(const Eigen::MatrixXd& values, const NormalizationConstants& k) {
  return (values.array() * (k.max - k.min) + k.min).matrix();
}

}  // namespace progmoe
