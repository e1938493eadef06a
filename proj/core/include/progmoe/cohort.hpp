#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

#include "progmoe/alignment.hpp"

namespace progmoe {

// ---------------------------------------------------------- normalized cohort

/// One subject per line: {"id": str, "gaps": [..], "obs": [[..], ..]}.
Cohort read_cohort_jsonl(std::istream& in);
Cohort load_cohort(const std::string& path);
void write_cohort_jsonl(std::ostream& out, const Cohort& cohort);
void save_cohort(const std::string& path, const Cohort& cohort);

// ---------------------------------------------------------------- raw cohort

struct RawSubject {
  std::string id;
  std::vector<std::string> dates;  // ISO-8601 calendar dates, strictly increasing
  Eigen::MatrixXd values;          // scans x regions, unnormalized
};

struct RawCohort {
  std::vector<std::string> region_names;
  std::vector<RawSubject> subjects;
};

/// Days since 1970-01-01 of a "YYYY-MM-DD" date (an optional "T..." suffix is ignored).
long days_from_iso_date(const std::string& date);

/// CSV with header subject_id,scan_date,<region...>. Rows of a subject may
/// appear in any order; they are sorted by date and duplicate dates are rejected.
RawCohort read_raw_cohort_csv(std::istream& in);
RawCohort load_raw_cohort(const std::string& path);

struct NormalizationConstants {
  double min = 0.0;
  double max = 1.0;
};

struct NormalizedCohort {
  Cohort cohort;
  NormalizationConstants constants;
};

/// Global min-max over all participants and regions; gaps in years (days / 365.25).
/// Throws DegenerateRange when fewer than two distinct values exist.
NormalizedCohort normalize(const RawCohort& raw);
/// Applies already-fitted constants.
Cohort normalize_with(const RawCohort& raw, const NormalizationConstants& constants);
Eigen::MatrixXd denormalize(const Eigen::MatrixXd& values, const NormalizationConstants& constants);

}  // namespace progmoe
