#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "memchan/channel.hpp"

namespace memchan {

using ojson = nlohmann::ordered_json;

inline ojson matrix_to_json(const CMatrix& m) {
  ojson rows = ojson::array();
  for (long r = 0; r < m.rows(); ++r) {
    ojson row = ojson::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline CMatrix matrix_from_json(const ojson& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw validation_error(where + ": expected a non-empty array of rows");
  long rows = static_cast<long>(j.size());
  if (!j[0].is_array() || j[0].empty())
    throw validation_error(where + ": row 0 is not a non-empty array");
  long cols = static_cast<long>(j[0].size());
  CMatrix m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    const ojson& row = j[r];
    if (!row.is_array() || static_cast<long>(row.size()) != cols)
      throw validation_error(where + ": row " + std::to_string(r) + " has ragged length");
    for (long c = 0; c < cols; ++c) {
      const ojson& e = row[c];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw validation_error(where + ": entry (" + std::to_string(r) + "," +
                               std::to_string(c) + ") is not a [re, im] pair");
      m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

namespace detail {

inline double require_number(const ojson& params, const char* name, const std::string& where) {
  if (!params.contains(name) || !params[name].is_number())
    throw validation_error(where + ": params." + name + " must be a number");
  return params[name].get<double>();
}

inline long optional_long(const ojson& params, const char* name, long fallback,
                          const std::string& where) {
  if (!params.contains(name)) return fallback;
  if (!params[name].is_number_integer())
    throw validation_error(where + ": params." + name + " must be an integer");
  return params[name].get<long>();
}

}  // namespace detail

// Parses a channel document: either {"name": <builtin>, "params": {...}} or
// {"dims": {"dA","dB","dM"}, "kraus": [matrix, ...]} with [re, im] entries.
inline MemoryChannel channel_from_spec(const ojson& doc, const std::string& where) {
  if (!doc.is_object()) throw validation_error(where + ": spec must be a JSON object");

  if (doc.contains("name")) {
    std::string name = doc["name"].get<std::string>();
    ojson params = doc.value("params", ojson::object());
    MemoryChannel mc = [&]() -> MemoryChannel {
      if (name == "shift") return shift_channel(detail::optional_long(params, "d", 2, where));
      if (name == "partial_flip")
        return partial_flip(detail::require_number(params, "eta", where),
                            detail::optional_long(params, "d", 2, where));
      if (name == "mixed_shift")
        return mixed_shift(detail::require_number(params, "p", where),
                           detail::optional_long(params, "d", 2, where));
      if (name == "switch") {
        std::vector<Channel> comps;
        if (params.contains("unitaries")) {
          for (std::size_t i = 0; i < params["unitaries"].size(); ++i) {
            CMatrix u = matrix_from_json(params["unitaries"][i],
                                         where + ": params.unitaries[" + std::to_string(i) + "]");
            comps.push_back(Channel::make(u.cols(), u.rows(), {u}));
          }
        } else {
          CMatrix z(2, 2);
          z << 1, 0, 0, -1;
          comps.push_back(identity_channel(2));
          comps.push_back(Channel{2, 2, {z}});
        }
        return switch_channel(comps);
      }
      if (name == "depolarize_mix") {
        if (!params.contains("base"))
          throw validation_error(where + ": depolarize_mix needs params.base, a nested spec");
        MemoryChannel base = channel_from_spec(params["base"], where + ": params.base");
        std::optional<DensityMatrix> delta;
        if (params.contains("delta"))
          delta = DensityMatrix::make(
              project_to_density(matrix_from_json(params["delta"], where + ": params.delta")));
        return depolarize_mix(base, detail::require_number(params, "eps", where),
                              std::move(delta));
      }
      throw validation_error(where + ": unknown builtin '" + name + "'");
    }();
    if (doc.contains("dims")) {
      const ojson& dims = doc["dims"];
      if (dims.value("dA", mc.dA) != mc.dA || dims.value("dB", mc.dB) != mc.dB ||
          dims.value("dM", mc.dM) != mc.dM)
        throw validation_error(where + ": dims do not match builtin '" + name + "'");
    }
    return mc;
  }

  if (doc.contains("kraus")) {
    if (!doc.contains("dims"))
      throw validation_error(where + ": explicit kraus spec needs dims {dA, dB, dM}");
    const ojson& dims = doc["dims"];
    for (const char* f : {"dA", "dB", "dM"})
      if (!dims.contains(f) || !dims[f].is_number_integer() || dims[f].get<long>() <= 0)
        throw validation_error(where + ": dims." + std::string(f) +
                               " must be a positive integer");
    long dA = dims["dA"].get<long>(), dB = dims["dB"].get<long>(), dM = dims["dM"].get<long>();
    check_dim(dM * dA, "channel spec");
    check_dim(dB * dM, "channel spec");
    if (!doc["kraus"].is_array() || doc["kraus"].empty())
      throw validation_error(where + ": kraus must be a non-empty array of matrices");
    std::vector<CMatrix> ks;
    for (std::size_t i = 0; i < doc["kraus"].size(); ++i) {
      CMatrix k = matrix_from_json(doc["kraus"][i], where + ": kraus[" + std::to_string(i) + "]");
      if (k.rows() != dB * dM || k.cols() != dM * dA)
        throw validation_error(where + ": kraus[" + std::to_string(i) + "] must be " +
                               std::to_string(dB * dM) + "x" + std::to_string(dM * dA));
      ks.push_back(std::move(k));
    }
    Channel step{dM * dA, dB * dM, std::move(ks)};
    auto [ok, residual] = validate_cptp(step, 1e-8);
    if (!ok) {
      std::ostringstream msg;
      msg << where << ": kraus set is not trace preserving (residual " << residual << ")";
      throw validation_error(msg.str());
    }
    return MemoryChannel{dA, dB, dM, std::move(step)};
  }

  throw validation_error(where + ": spec needs either a builtin 'name' or explicit 'kraus'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline ojson parse_json_file(const std::string& path) {
  std::string text = read_file(path);
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(path + ": " + e.what());
  }
}

inline MemoryChannel channel_from_file(const std::string& path) {
  return channel_from_spec(parse_json_file(path), path);
}

// State specs: "maximally_mixed", "basis:<k>", or a path to a JSON matrix.
inline DensityMatrix state_from_spec(const std::string& spec, long dim) {
  if (spec == "maximally_mixed") return maximally_mixed(dim);
  if (spec.rfind("basis:", 0) == 0) {
    long k = -1;
    try {
      k = std::stol(spec.substr(6));
    } catch (...) {
      throw validation_error("state spec '" + spec + "': bad basis index");
    }
    if (k < 0 || k >= dim)
      throw validation_error("state spec '" + spec + "': basis index outside [0, " +
                             std::to_string(dim) + ")");
    return basis_state(dim, k);
  }
  CMatrix m = matrix_from_json(parse_json_file(spec), spec);
  if (m.rows() != dim || m.cols() != dim)
    throw validation_error(spec + ": state must be " + std::to_string(dim) + "x" +
                           std::to_string(dim));
  if (!is_hermitian(m, 1e-8) || std::abs(m.trace().real() - 1.0) > 1e-8)
    throw validation_error(spec + ": state must be hermitian with unit trace");
  EigH e = eig_hermitian((m + m.adjoint()) / 2.0, 1e-8);
  if (e.values.minCoeff() < -1e-8) throw validation_error(spec + ": state is not positive");
  return DensityMatrix::make(project_to_density(m));
}

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::string file_digest(const std::string& path) { return fnv1a_hex(read_file(path)); }

inline ojson series_to_json(const std::vector<std::pair<int, double>>& series) {
  ojson out = ojson::array();
  for (const auto& [n, v] : series) out.push_back({{"n", n}, {"value", v}});
  return out;
}

inline std::string series_to_csv(const std::vector<std::pair<int, double>>& series) {
  std::ostringstream out;
  out << "n,value\n";
  out.precision(17);
  for (const auto& [n, v] : series) out << n << "," << v << "\n";
  return out.str();
}

}  // namespace memchan
