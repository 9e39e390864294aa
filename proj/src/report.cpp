#include "shiftlab/report.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "shiftlab/error.hpp"
#include "shiftlab/feature_table.hpp"

namespace shiftlab::report {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << content;
}

namespace {

struct CsvFile {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvFile read_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  CsvFile csv;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      csv.comments.push_back(line.size() > 2 ? line.substr(2) : "");
    } else if (!header) {
      csv.header = split(line);
      header = true;
    } else {
      csv.rows.push_back(split(line));
    }
  }
  if (!header) throw Error(ErrorKind::parse, path.string() + " has no header row");
  return csv;
}

std::string comment_block(const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  return out;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

json mean_std_json(const evaluate::MeanStd& ms) { return {{"mean", ms.mean}, {"std", ms.std}}; }

std::string subject_label(int id) { return id < 0 ? "All" : "S" + std::to_string(id); }

}  // namespace

void write_matrix_csv(const fs::path& path, const Matrix& m, const std::vector<std::string>& comments) {
  std::string out = comment_block(comments);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  write_file(path, out);
}

Matrix read_matrix_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  Matrix m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    for (const auto& cell : split(line)) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::parse, path.string() + ": bad matrix cell '" + cell + "'");
      }
    }
    if (!m.empty() && row.size() != m.cols())
      throw Error(ErrorKind::parse, path.string() + ": ragged matrix");
    m.append_row(row);
  }
  return m;
}

void write_scheme_report(const fs::path& dir, const evaluate::SchemeReport& report) {
  const auto& cfg = report.config;
  const std::string scheme(normalize::to_string(cfg.scheme.kind));
  const fs::path out = dir / scheme;
  fs::create_directories(out);
  const std::vector<std::string> comments{"config: " + evaluate::config_to_json(cfg)};

  json j;
  j["scheme"] = scheme;
  j["config"] = json::parse(evaluate::config_to_json(cfg));
  j["subjects"] = report.subjects;
  if (cfg.run_classification) {
    json subjects = json::array();
    for (const auto& s : report.per_subject)
      subjects.push_back({{"subject", s.subject},
                          {"train", mean_std_json(s.train)},
                          {"test", mean_std_json(s.test)},
                          {"gap", mean_std_json(s.gap)}});
    j["per_subject"] = subjects;
    j["overall"] = {{"train", mean_std_json(report.overall.train)},
                    {"test", mean_std_json(report.overall.test)},
                    {"gap", mean_std_json(report.overall.gap)}};
  }
  if (cfg.estimate_shift) {
    std::vector<double> cond, marg;
    for (const auto& r : report.repetitions) {
      cond.push_back(r.conditional);
      marg.push_back(r.marginal);
    }
    j["conditional_shift"] = {{"mean", report.conditional.mean}, {"std", report.conditional.std}, {"values", cond}};
    j["marginal_shift"] = {{"mean", report.marginal.mean}, {"std", report.marginal.std}, {"values", marg}};
    j["disparity_avg"] = matrix_json(report.disparity_avg);
    j["marginal_avg"] = matrix_json(report.marginal_avg);
    j["per_subject_disparity"] = report.subject_disparity;
  }
  write_file(out / "report.json", j.dump(2) + "\n");

  std::string table = comment_block(comments) + "subject,metric,mean,std\n";
  auto add_row = [&](const std::string& subject, const char* metric, const evaluate::MeanStd& ms) {
    table += subject + "," + metric + "," + format_double(ms.mean) + "," + format_double(ms.std) + "\n";
  };
  if (cfg.run_classification) {
    for (const auto& s : report.per_subject) {
      add_row(subject_label(s.subject), "train", s.train);
      add_row(subject_label(s.subject), "test", s.test);
      add_row(subject_label(s.subject), "gap", s.gap);
    }
    add_row("All", "train", report.overall.train);
    add_row("All", "test", report.overall.test);
    add_row("All", "gap", report.overall.gap);
  }
  if (cfg.estimate_shift) {
    add_row("All", "cond_shift", report.conditional);
    add_row("All", "marg_shift", report.marginal);
  }
  write_file(out / "table1.csv", table);

  std::string runs = comment_block(comments) + "repetition,scheme,metric,subject,value\n";
  for (const auto& rep : report.repetitions) {
    const std::string prefix = std::to_string(rep.index) + "," + scheme + ",";
    if (cfg.estimate_shift) {
      runs += prefix + "conditional_shift,all," + format_double(rep.conditional) + "\n";
      runs += prefix + "marginal_shift,all," + format_double(rep.marginal) + "\n";
    }
    for (const auto& run : rep.runs) {
      const std::string subj = std::to_string(run.subject) + ",";
      runs += prefix + "train_acc," + subj + format_double(run.train_acc) + "\n";
      runs += prefix + "test_acc," + subj + format_double(run.test_acc) + "\n";
      runs += prefix + "gap," + subj + format_double(run.gap) + "\n";
    }
  }
  write_file(out / "runs.csv", runs);

  if (cfg.estimate_shift) {
    write_matrix_csv(out / "disparity_avg.csv", report.disparity_avg, comments);
    write_matrix_csv(out / "marginal_avg.csv", report.marginal_avg, comments);
    std::string psd = comment_block(comments) + "subject," + scheme + "\n";
    for (std::size_t s = 0; s < report.subjects.size(); ++s)
      psd += std::to_string(report.subjects[s]) + "," + format_double(report.subject_disparity[s]) + "\n";
    write_file(out / "per_subject_disparity.csv", psd);
  }
}

std::vector<std::string> consolidate(const fs::path& dir) {
  std::vector<std::string> schemes;
  for (auto kind : normalize::kAllSchemes) {
    const std::string name(normalize::to_string(kind));
    if (fs::exists(dir / name / "runs.csv")) schemes.push_back(name);
  }
  if (schemes.empty())
    throw Error(ErrorKind::io, "no scheme results (e.g. " + (dir / "none" / "runs.csv").string() +
                                   ") found under " + dir.string());

  std::vector<std::string> comments;
  std::string runs_body;
  std::vector<std::pair<std::string, std::string>> table_keys;  // (subject, metric) in first-seen order
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::pair<std::string, std::string>>> cells;
  std::vector<std::string> psd_schemes;
  std::vector<std::string> psd_subjects;
  std::map<std::string, std::map<std::string, std::string>> psd_cells;
  json reports = json::object();

  for (const auto& s : schemes) {
    const fs::path sub = dir / s;
    for (const char* needed : {"runs.csv", "table1.csv", "report.json"})
      if (!fs::exists(sub / needed))
        throw Error(ErrorKind::io, "missing " + (sub / needed).string());

    auto runs = read_csv(sub / "runs.csv");
    for (const auto& c : runs.comments) comments.push_back(s + " " + c);
    for (const auto& row : runs.rows) {
      std::string line;
      for (std::size_t k = 0; k < row.size(); ++k) line += (k ? "," : "") + row[k];
      runs_body += line + "\n";
    }

    auto table = read_csv(sub / "table1.csv");
    for (const auto& row : table.rows) {
      if (row.size() < 4) throw Error(ErrorKind::parse, (sub / "table1.csv").string() + ": short row");
      std::pair key{row[0], row[1]};
      if (!cells.count(key)) table_keys.push_back(key);
      cells[key][s] = {row[2], row[3]};
    }

    if (fs::exists(sub / "per_subject_disparity.csv")) {
      auto psd = read_csv(sub / "per_subject_disparity.csv");
      psd_schemes.push_back(s);
      for (const auto& row : psd.rows) {
        if (row.size() < 2) continue;
        if (std::find(psd_subjects.begin(), psd_subjects.end(), row[0]) == psd_subjects.end())
          psd_subjects.push_back(row[0]);
        psd_cells[row[0]][s] = row[1];
      }
    }
    reports[s] = json::parse(read_file(sub / "report.json"));
  }

  write_file(dir / "runs.csv",
             comment_block(comments) + "repetition,scheme,metric,subject,value\n" + runs_body);

  std::string table = comment_block(comments) + "subject,metric";
  for (const auto& s : schemes) table += "," + s + "_mean," + s + "_std";
  table += "\n";
  for (const auto& key : table_keys) {
    table += key.first + "," + key.second;
    for (const auto& s : schemes) {
      auto it = cells[key].find(s);
      table += it == cells[key].end() ? ",," : "," + it->second.first + "," + it->second.second;
    }
    table += "\n";
  }
  write_file(dir / "table1.csv", table);

  if (!psd_schemes.empty()) {
    std::string psd = comment_block(comments) + "subject";
    for (const auto& s : psd_schemes) psd += "," + s;
    psd += "\n";
    for (const auto& subj : psd_subjects) {
      psd += subj;
      for (const auto& s : psd_schemes) psd += "," + psd_cells[subj][s];
      psd += "\n";
    }
    write_file(dir / "per_subject_disparity.csv", psd);
  }

  json combined;
  combined["schemes"] = schemes;
  combined["reports"] = reports;
  write_file(dir / "report.json", combined.dump(2) + "\n");
  return schemes;
}

void print_summary(std::ostream& out, const fs::path& dir) {
  auto table = read_csv(dir / "table1.csv");
  if (table.header.size() < 4 || table.header.size() % 2 != 0)
    throw Error(ErrorKind::parse, (dir / "table1.csv").string() + ": unexpected header");
  const std::size_t n_schemes = (table.header.size() - 2) / 2;
  out << std::left << std::setw(8) << "subject" << std::setw(12) << "metric";
  for (std::size_t s = 0; s < n_schemes; ++s) {
    auto name = table.header[2 + 2 * s];
    out << std::setw(20) << name.substr(0, name.size() - 5);
  }
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw Error(ErrorKind::parse, (dir / "table1.csv").string() + ": ragged row");
    out << std::setw(8) << row[0] << std::setw(12) << row[1];
    for (std::size_t s = 0; s < n_schemes; ++s) {
      const auto& mean = row[2 + 2 * s];
      const auto& sd = row[3 + 2 * s];
      std::ostringstream cell;
      if (!mean.empty()) {
        try {
          cell << std::fixed << std::setprecision(3) << std::stod(mean) << "+-" << std::stod(sd);
        } catch (const std::exception&) {
          throw Error(ErrorKind::parse, (dir / "table1.csv").string() + ": bad value '" + mean + "'");
        }
      }
      out << std::setw(20) << cell.str();
    }
    out << '\n';
  }
}

}  // namespace shiftlab::report
