#include "sentinet/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace sentinet {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) {
    throw IoError("failed to format a double");
  }
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw IoError("not a number: '" + s + "'");
  }
  return v;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string() + " for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << content;
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

void write_dynamics_csv(const std::filesystem::path& path,
                        const DynamicsMatrix& d) {
  std::string out;
  out.reserve(static_cast<size_t>(d.values.size()) * 8);
  if (!d.component_ids.empty()) {
    if (static_cast<Eigen::Index>(d.component_ids.size()) !=
        d.n_components()) {
      throw DimensionMismatch("component id count does not match columns");
    }
    for (size_t i = 0; i < d.component_ids.size(); ++i) {
      if (i > 0) out += ',';
      out += d.component_ids[i];
    }
    out += '\n';
  }
  for (Eigen::Index r = 0; r < d.t_rows(); ++r) {
    for (Eigen::Index c = 0; c < d.n_components(); ++c) {
      if (c > 0) out += ',';
      out += format_double(d.values(r, c));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream ss(line);
  while (std::getline(ss, token, ',')) {
    out.push_back(token);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

bool all_numeric(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) {
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
      return false;
    }
  }
  return true;
}

}  // namespace

DynamicsMatrix read_dynamics_csv(const std::filesystem::path& path,
                                 Mode mode) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) {
    throw IoError("empty dynamics file " + path.string());
  }

  DynamicsMatrix d;
  d.mode = mode;
  size_t first_data = 0;
  if (!all_numeric(rows[0])) {
    d.component_ids = rows[0];
    first_data = 1;
  }
  if (rows.size() <= first_data) {
    throw IoError("dynamics file " + path.string() + " has no data rows");
  }
  const size_t n = rows[first_data].size();
  const size_t t = rows.size() - first_data;
  d.values.resize(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n));
  for (size_t r = 0; r < t; ++r) {
    const auto& tokens = rows[r + first_data];
    if (tokens.size() != n) {
      throw IoError("row " + std::to_string(r) + " of " + path.string() +
                    " has " + std::to_string(tokens.size()) +
                    " fields, expected " + std::to_string(n));
    }
    for (size_t c = 0; c < n; ++c) {
      double v;
      try {
        v = parse_double(tokens[c]);
      } catch (const IoError&) {
        throw IoError("bad value in " + path.string() + " at row " +
                      std::to_string(r) + ", column " + std::to_string(c));
      }
      if (mode == Mode::discrete && v != 0.0 && v != 1.0) {
        throw IoError("discrete dynamics must be 0/1; found " + tokens[c] +
                      " in " + path.string());
      }
      d.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return d;
}

namespace {

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(m(r, c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& j, const char* what) {
  if (!j.is_array()) {
    throw IoError(std::string(what) + " must be an array of arrays");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw IoError(std::string(what) + " rows have uneven lengths");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = row[static_cast<size_t>(c)].get<double>();
    }
  }
  return m;
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const ordered_json& j, const char* what) {
  if (!j.is_array()) {
    throw IoError(std::string(what) + " must be an array");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

ordered_json indices_to_json(const std::vector<Eigen::Index>& idx) {
  ordered_json out = ordered_json::array();
  for (auto i : idx) out.push_back(static_cast<std::int64_t>(i));
  return out;
}

std::vector<Eigen::Index> indices_from_json(const ordered_json& j,
                                            const char* what) {
  if (!j.is_array()) {
    throw IoError(std::string(what) + " must be an array");
  }
  std::vector<Eigen::Index> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    out.push_back(static_cast<Eigen::Index>(v.get<std::int64_t>()));
  }
  return out;
}

ordered_json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw IoError("invalid JSON in " + path.string());
  }
  return j;
}

}  // namespace

void write_truth_json(const std::filesystem::path& path,
                      const SyntheticTruth& truth) {
  ordered_json j;
  j["gamma_true"] = vector_to_json(truth.gamma_true);
  j["sentinels"] = indices_to_json(truth.sentinels);
  j["S_true"] = matrix_to_json(truth.s_true);
  j["kind"] = to_string(truth.kind);
  j["stability_scale"] = truth.stability_scale;
  write_text_file(path, j.dump(2) + "\n");
}

SyntheticTruth read_truth_json(const std::filesystem::path& path) {
  const ordered_json j = parse_json_file(path);
  SyntheticTruth truth;
  try {
    truth.gamma_true = vector_from_json(j.at("gamma_true"), "gamma_true");
    truth.sentinels = indices_from_json(j.at("sentinels"), "sentinels");
    truth.s_true = matrix_from_json(j.at("S_true"), "S_true");
    truth.kind = system_kind_from_string(j.at("kind").get<std::string>());
    truth.stability_scale = j.at("stability_scale").get<double>();
  } catch (const ordered_json::exception& e) {
    throw IoError("malformed truth file " + path.string() + ": " + e.what());
  }
  return truth;
}

ModelFile model_from_selection(const SelectionResult& sel,
                               Eigen::Index n_components,
                               const std::vector<std::string>& basis_names) {
  ModelFile m;
  m.kind = sel.kind;
  m.n_components = n_components;
  m.basis_names = basis_names;
  m.sentinels = sel.sentinels;
  m.priority_order = sel.priority_order;
  m.gamma = sel.gamma_final;
  m.lambda = sel.linear_final.lambda;
  m.M = sel.posterior_final.M;
  m.sigma = sel.posterior_final.sigma;
  return m;
}

void write_model_json(const std::filesystem::path& path, const ModelFile& m) {
  ordered_json j;
  j["kind"] = to_string(m.kind);
  j["n_components"] = static_cast<std::int64_t>(m.n_components);
  j["basis"] = m.basis_names;
  j["sentinels"] = indices_to_json(m.sentinels);
  j["priority_order"] = indices_to_json(m.priority_order);
  j["gamma"] = vector_to_json(m.gamma);
  j["lambda"] = m.lambda;
  j["M"] = matrix_to_json(m.M);
  ordered_json blocks = ordered_json::array();
  for (const auto& sigma : m.sigma) {
    blocks.push_back(matrix_to_json(sigma));
  }
  j["sigma"] = std::move(blocks);
  write_text_file(path, j.dump(2) + "\n");
}

ModelFile read_model_json(const std::filesystem::path& path) {
  const ordered_json j = parse_json_file(path);
  ModelFile m;
  try {
    m.kind = system_kind_from_string(j.at("kind").get<std::string>());
    m.n_components = j.at("n_components").get<std::int64_t>();
    m.basis_names = j.at("basis").get<std::vector<std::string>>();
    m.sentinels = indices_from_json(j.at("sentinels"), "sentinels");
    m.priority_order =
        indices_from_json(j.at("priority_order"), "priority_order");
    m.gamma = vector_from_json(j.at("gamma"), "gamma");
    m.lambda = j.at("lambda").get<double>();
    m.M = matrix_from_json(j.at("M"), "M");
    for (const auto& blk : j.at("sigma")) {
      m.sigma.push_back(matrix_from_json(blk, "sigma block"));
    }
  } catch (const ordered_json::exception& e) {
    throw IoError("malformed model file " + path.string() + ": " + e.what());
  }
  return m;
}

void write_matrix_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& m) {
  std::string out;
  out.reserve(static_cast<size_t>(m.size()) * 8);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace sentinet
