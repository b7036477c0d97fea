#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "llp/data.hpp"

// Bag dataset serialization (JSON Lines) and labeled-CSV ingestion.
//
// JSONL schema, one bag per line:
//   {"k": int, "alpha_count": int, "instances": [[f64, ...], ...],
//    "labels": [0|1, ...]}          (labels optional)
// Doubles are written in shortest round-trip form, so save -> load -> save
// reproduces the file byte for byte.

namespace llp {

// Shortest round-trip decimal form, locale-independent; CSV writers use this
// so identical values always print identically.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: buffer too small");
  return std::string(buf, ptr);
}

inline std::string bag_to_json_line(const Bag& bag, int k,
                                    const std::vector<std::uint8_t>* labels) {
  nlohmann::ordered_json j;
  j["k"] = k;
  j["alpha_count"] = bag.label_count;
  nlohmann::ordered_json inst = nlohmann::ordered_json::array();
  for (const Instance& x : bag.instances) inst.push_back(x.features);
  j["instances"] = std::move(inst);
  if (labels) {
    std::vector<int> ls(labels->begin(), labels->end());
    j["labels"] = ls;
  }
  return j.dump();
}

inline void save_bags(const BagDataset& ds, std::ostream& out) {
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    const std::vector<std::uint8_t>* labels =
        ds.true_labels ? &(*ds.true_labels)[i] : nullptr;
    out << bag_to_json_line(ds.bags[i], ds.k, labels) << '\n';
  }
}

inline void save_bags(const BagDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_bags: cannot open " + path);
  save_bags(ds, out);
}

inline BagDataset load_bags(std::istream& in) {
  BagDataset ds;
  bool any_labels = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("load_bags: line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    auto fail = [&](const std::string& what) -> std::runtime_error {
      return std::runtime_error("load_bags: line " + std::to_string(line_no) +
                                ": " + what);
    };
    if (!j.is_object() || !j.contains("k") || !j.contains("alpha_count") ||
        !j.contains("instances")) {
      throw fail("expected object with k, alpha_count, instances");
    }
    int k = j["k"].get<int>();
    if (ds.bags.empty()) {
      ds.k = k;
    } else if (k != ds.k) {
      throw fail("k=" + std::to_string(k) + " differs from first bag's k=" +
                 std::to_string(ds.k));
    }
    Bag bag;
    bag.label_count = j["alpha_count"].get<int>();
    if (bag.label_count < 0 || bag.label_count > k) {
      throw fail("alpha_count outside [0, k]");
    }
    if (!j["instances"].is_array() ||
        j["instances"].size() != static_cast<std::size_t>(k)) {
      throw fail("instances must be an array of length k");
    }
    for (const auto& row : j["instances"]) {
      if (!row.is_array()) throw fail("instance is not an array");
      Instance x;
      x.features = row.get<std::vector<double>>();
      if (ds.bags.empty() && bag.instances.empty()) {
        ds.feature_dim = x.features.size();
      } else if (x.features.size() != ds.feature_dim) {
        throw fail("inconsistent feature_dim");
      }
      bag.instances.push_back(std::move(x));
    }
    if (j.contains("labels")) {
      if (ds.bags.empty()) {
        any_labels = true;
        ds.true_labels.emplace();
      } else if (!any_labels) {
        throw fail("labels present here but missing earlier");
      }
      auto ls = j["labels"].get<std::vector<int>>();
      if (ls.size() != static_cast<std::size_t>(k)) {
        throw fail("labels must have length k");
      }
      std::vector<std::uint8_t> lab;
      for (int v : ls) {
        if (v != 0 && v != 1) throw fail("labels must be 0 or 1");
        lab.push_back(static_cast<std::uint8_t>(v));
      }
      ds.true_labels->push_back(std::move(lab));
    } else if (any_labels) {
      throw fail("labels missing here but present earlier");
    }
    ds.bags.push_back(std::move(bag));
  }
  if (ds.bags.empty()) throw std::runtime_error("load_bags: no bags in input");
  ds.validate();
  return ds;
}

inline BagDataset load_bags(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_bags: cannot open " + path);
  return load_bags(in);
}

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

// Reads a header-row CSV of labeled instances and bags them.  label_column
// names the 0/1 label column; every other column is a feature.  Rows are
// chunked into bags of size k after an optional seeded shuffle (no seed keeps
// file order).  Errors name the offending row and column.
inline BagDataset load_csv(const std::string& path,
                           const std::string& label_column, int k,
                           std::optional<std::uint64_t> seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_csv: " + path + " is empty (header row required)");
  }
  std::vector<std::string> header = detail::split_csv_row(line);
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) label_idx = i;
  }
  if (label_idx == header.size()) {
    throw std::runtime_error("load_csv: no column named '" + label_column +
                             "' in header of " + path);
  }
  std::vector<Instance> xs;
  std::vector<std::uint8_t> ys;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    std::vector<std::string> cells = detail::split_csv_row(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("load_csv: row " + std::to_string(row_no) +
                               " has " + std::to_string(cells.size()) +
                               " cells, header has " +
                               std::to_string(header.size()));
    }
    Instance x;
    std::uint8_t y = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double v = 0.0;
      const std::string& cell = cells[i];
      auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw std::runtime_error("load_csv: row " + std::to_string(row_no) +
                                 ", column '" + header[i] +
                                 "': cannot parse '" + cell + "' as a number");
      }
      if (i == label_idx) {
        if (v != 0.0 && v != 1.0) {
          throw std::runtime_error("load_csv: row " + std::to_string(row_no) +
                                   ", column '" + header[i] +
                                   "': label must be 0 or 1, got '" + cell + "'");
        }
        y = static_cast<std::uint8_t>(v);
      } else {
        x.features.push_back(v);
      }
    }
    xs.push_back(std::move(x));
    ys.push_back(y);
  }
  if (xs.empty()) throw std::runtime_error("load_csv: no data rows in " + path);
  return make_bags(std::move(xs), std::move(ys), k, seed);
}

}  // namespace llp
