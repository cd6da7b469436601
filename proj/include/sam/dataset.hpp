#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sam/error.hpp"
#include "sam/io.hpp"
#include "sam/matrix.hpp"

namespace sam {

//! Labeled sample: unique ids, one class label per id, optional raw texts.
//!
//! The class set is kept in sorted order; `codes()` maps every sample to the
//! index of its label in that order. At least two samples and two distinct
//! labels are required.
class LabeledDataset {
 public:
  LabeledDataset(std::vector<std::string> ids, std::vector<std::string> labels,
                 std::optional<std::vector<std::string>> texts = std::nullopt)
      : ids_(std::move(ids)), labels_(std::move(labels)), texts_(std::move(texts)) {
    if (ids_.size() != labels_.size()) {
      throw ValidationError("dataset has " + std::to_string(ids_.size()) + " ids but " +
                            std::to_string(labels_.size()) + " labels");
    }
    if (texts_ && texts_->size() != ids_.size()) {
      throw ValidationError("dataset texts are not parallel to ids");
    }
    if (ids_.size() < 2) throw ValidationError("dataset needs at least 2 samples");
    std::unordered_set<std::string_view> seen;
    for (const auto& id : ids_) {
      if (!seen.insert(id).second) throw ValidationError("duplicate id \"" + id + "\"");
    }
    std::set<std::string> classes(labels_.begin(), labels_.end());
    if (classes.size() < 2) throw ValidationError("dataset needs at least 2 distinct labels");
    classes_.assign(classes.begin(), classes.end());
    codes_.reserve(labels_.size());
    for (const auto& l : labels_) {
      codes_.push_back(static_cast<std::size_t>(
          std::lower_bound(classes_.begin(), classes_.end(), l) - classes_.begin()));
    }
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::optional<std::vector<std::string>>& texts() const { return texts_; }
  bool has_texts() const { return texts_.has_value(); }

  //! Sorted distinct labels.
  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t class_count() const { return classes_.size(); }
  //! Per-sample index into `classes()`.
  const std::vector<std::size_t>& codes() const { return codes_; }

  std::optional<std::size_t> class_index(std::string_view label) const {
    auto it = std::lower_bound(classes_.begin(), classes_.end(), label);
    if (it == classes_.end() || *it != label) return std::nullopt;
    return static_cast<std::size_t>(it - classes_.begin());
  }

  LabeledDataset subset(std::span<const std::size_t> rows) const {
    std::vector<std::string> ids, labels, texts;
    for (auto r : rows) {
      ids.push_back(ids_.at(r));
      labels.push_back(labels_.at(r));
      if (texts_) texts.push_back((*texts_)[r]);
    }
    if (texts_) return LabeledDataset(std::move(ids), std::move(labels), std::move(texts));
    return LabeledDataset(std::move(ids), std::move(labels));
  }

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> labels_;
  std::optional<std::vector<std::string>> texts_;
  std::vector<std::string> classes_;
  std::vector<std::size_t> codes_;
};

enum class DatasetFormat { jsonl, tsv };

inline DatasetFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? DatasetFormat::jsonl : DatasetFormat::tsv;
}

namespace detail {

inline LabeledDataset parse_jsonl(std::string_view text) {
  std::vector<std::string> ids, labels, texts;
  bool any_text = false;
  bool all_text = true;
  const auto rows = io::lines(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto line_no = std::to_string(i + 1);
    if (rows[i].find_first_not_of(" \t") == std::string_view::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(rows[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("line " + line_no + ": invalid JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw ValidationError("line " + line_no + ": expected a JSON object");
    if (!obj.contains("id") || !obj["id"].is_string()) {
      throw ValidationError("line " + line_no + ": missing string field \"id\"");
    }
    if (!obj.contains("label") || !obj["label"].is_string()) {
      throw ValidationError("line " + line_no + ": missing string field \"label\"");
    }
    ids.push_back(obj["id"].get<std::string>());
    labels.push_back(obj["label"].get<std::string>());
    if (obj.contains("text") && obj["text"].is_string()) {
      texts.push_back(obj["text"].get<std::string>());
      any_text = true;
    } else {
      texts.emplace_back();
      all_text = false;
    }
  }
  if (any_text && !all_text) {
    throw ValidationError("field \"text\" is present on some lines but not all");
  }
  if (any_text) return LabeledDataset(std::move(ids), std::move(labels), std::move(texts));
  return LabeledDataset(std::move(ids), std::move(labels));
}

// Header row names the columns; "id" and "label" are required, "text" optional.
inline LabeledDataset parse_tsv(std::string_view text) {
  const auto rows = io::lines(text);
  if (rows.empty()) throw ValidationError("empty TSV file");
  const auto header = io::split(rows[0], '\t');
  std::optional<std::size_t> id_col, label_col, text_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "id") id_col = c;
    else if (header[c] == "label") label_col = c;
    else if (header[c] == "text") text_col = c;
  }
  if (!id_col || !label_col) throw ValidationError("TSV header must name columns id and label");
  std::vector<std::string> ids, labels, texts;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto line_no = std::to_string(i + 1);
    const auto cols = io::split(rows[i], '\t');
    if (cols.size() != header.size()) {
      throw ValidationError("line " + line_no + ": expected " + std::to_string(header.size()) +
                            " columns, found " + std::to_string(cols.size()));
    }
    if (cols[*label_col].empty()) throw ValidationError("line " + line_no + ": missing label");
    ids.emplace_back(cols[*id_col]);
    labels.emplace_back(cols[*label_col]);
    if (text_col) texts.emplace_back(cols[*text_col]);
  }
  if (text_col) return LabeledDataset(std::move(ids), std::move(labels), std::move(texts));
  return LabeledDataset(std::move(ids), std::move(labels));
}

}  // namespace detail

inline LabeledDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  const auto text = io::read_file(path);
  try {
    return format == DatasetFormat::jsonl ? detail::parse_jsonl(text) : detail::parse_tsv(text);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline LabeledDataset load_dataset(const std::filesystem::path& path) {
  return load_dataset(path, format_from_path(path));
}

inline std::string to_jsonl(const LabeledDataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    nlohmann::json obj = {{"id", ds.ids()[i]}, {"label", ds.labels()[i]}};
    if (ds.has_texts()) obj["text"] = (*ds.texts())[i];
    out += obj.dump();
    out += '\n';
  }
  return out;
}

// Label sidecar: "id\tlabel" rows under a header, in row order.
inline std::string to_label_tsv(const LabeledDataset& ds) {
  std::string out = "id\tlabel\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += ds.ids()[i] + '\t' + ds.labels()[i] + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vector files.
//
// Binary layout: "SAMV", u16 version (1), u64 rows, u64 cols, then rows*cols
// little-endian IEEE-754 binary32 values in row-major order.

inline constexpr char kVectorMagic[4] = {'S', 'A', 'M', 'V'};
inline constexpr std::uint16_t kVectorVersion = 1;
inline constexpr std::size_t kVectorHeaderSize = 4 + 2 + 8 + 8;

namespace detail {

template <typename U>
void put_le(std::string& out, U value) {
  char bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  out.append(bytes, sizeof(U));
}

template <typename U>
U get_le(const char* p) {
  char bytes[sizeof(U)];
  std::memcpy(bytes, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  U value;
  std::memcpy(&value, bytes, sizeof(U));
  return value;
}

}  // namespace detail

inline std::string encode_vectors(const EmbeddingMatrix& m) {
  std::string out;
  out.reserve(kVectorHeaderSize + m.values().size() * 4);
  out.append(kVectorMagic, 4);
  detail::put_le<std::uint16_t>(out, kVectorVersion);
  detail::put_le<std::uint64_t>(out, m.rows());
  detail::put_le<std::uint64_t>(out, m.cols());
  for (float v : m.values()) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline EmbeddingMatrix decode_vectors(std::string_view bytes) {
  if (bytes.size() < kVectorHeaderSize || std::memcmp(bytes.data(), kVectorMagic, 4) != 0) {
    throw ValidationError("not a SAMV vector file (bad magic)");
  }
  const auto version = detail::get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kVectorVersion) {
    throw ValidationError("unsupported SAMV version " + std::to_string(version));
  }
  const auto rows = detail::get_le<std::uint64_t>(bytes.data() + 6);
  const auto cols = detail::get_le<std::uint64_t>(bytes.data() + 14);
  if (cols == 0) throw ValidationError("SAMV header declares zero columns");
  const auto payload = bytes.size() - kVectorHeaderSize;
  if (rows > payload / 4 / cols || rows * cols * 4 != payload) {
    throw ValidationError("SAMV header declares " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " but payload holds " +
                          std::to_string(payload) + " bytes");
  }
  std::vector<float> data(rows * cols);
  const char* p = bytes.data() + kVectorHeaderSize;
  for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
    data[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(p));
  }
  return EmbeddingMatrix(rows, cols, std::move(data));
}

inline std::string to_vector_csv(const EmbeddingMatrix& m, std::span<const std::string> ids) {
  if (ids.size() != m.rows()) throw ValidationError("vector CSV needs one id per row");
  std::string out = "id";
  for (std::size_t c = 0; c < m.cols(); ++c) out += ",v" + std::to_string(c);
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += ids[r];
    for (float v : m.row(r)) {
      out += ',';
      out += io::format_number(v);
    }
    out += '\n';
  }
  return out;
}

struct VectorTable {
  std::vector<std::string> ids;
  EmbeddingMatrix matrix;
};

inline VectorTable parse_vector_csv(std::string_view text) {
  const auto rows = io::lines(text);
  if (rows.empty()) throw ValidationError("empty vector CSV");
  const auto header = io::split(rows[0], ',');
  if (header.size() < 2 || header[0] != "id") {
    throw ValidationError("vector CSV header must be id,v0,...");
  }
  const std::size_t cols = header.size() - 1;
  for (std::size_t c = 0; c < cols; ++c) {
    if (header[c + 1] != "v" + std::to_string(c)) {
      throw ValidationError("vector CSV header column " + std::to_string(c + 1) +
                            " should be v" + std::to_string(c));
    }
  }
  VectorTable table;
  std::vector<float> data;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto fields = io::split(rows[i], ',');
    const std::size_t row = table.ids.size();
    if (fields.size() != cols + 1) {
      throw ValidationError("vector CSV row " + std::to_string(row) + " has " +
                            std::to_string(fields.size() - 1) + " values, expected " +
                            std::to_string(cols));
    }
    table.ids.emplace_back(fields[0]);
    for (std::size_t c = 0; c < cols; ++c) {
      float v = 0;
      if (!io::parse_number(fields[c + 1], v)) {
        throw ValidationError("vector CSV row " + std::to_string(row) + ": cannot parse \"" +
                              std::string(fields[c + 1]) + "\"");
      }
      if (!std::isfinite(v)) {
        throw NumericError("non-finite value in vector CSV row " + std::to_string(row));
      }
      data.push_back(v);
    }
  }
  table.matrix = EmbeddingMatrix(table.ids.size(), cols, std::move(data));
  return table;
}

inline void save_vectors(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  io::write_file_atomic(path, encode_vectors(m));
}

//! Loads a SAMV binary file, or a headered CSV when the magic is absent.
inline EmbeddingMatrix load_vectors(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  try {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kVectorMagic, 4) == 0) {
      return decode_vectors(bytes);
    }
    if (bytes.starts_with("id,")) return parse_vector_csv(bytes).matrix;
    return decode_vectors(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Bag of words.

//! Term to column map. Terms keep the order in which they were first added.
class VocabIndex {
 public:
  VocabIndex() = default;
  explicit VocabIndex(std::vector<std::string> terms) {
    for (auto& t : terms) add(std::move(t));
  }

  std::size_t add(std::string term) {
    auto [it, inserted] = index_.try_emplace(term, terms_.size());
    if (inserted) terms_.push_back(std::move(term));
    return it->second;
  }

  std::optional<std::size_t> find(const std::string& term) const {
    auto it = index_.find(term);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }

  //! Same terms, lexicographically ordered.
  VocabIndex sorted() const {
    auto terms = terms_;
    std::sort(terms.begin(), terms.end());
    return VocabIndex(std::move(terms));
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> terms_;
};

//! Lowercases and splits on runs of ASCII characters that are not letters or
//! digits. Bytes >= 0x80 are kept inside tokens so UTF-8 words stay whole.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      current += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace detail {

inline const std::vector<std::string>& require_texts(const LabeledDataset& ds) {
  if (!ds.has_texts()) throw ValidationError("dataset has no texts to build bag-of-words from");
  return *ds.texts();
}

}  // namespace detail

//! Raw term-frequency matrix over a fixed vocabulary. Tokens outside the
//! vocabulary are ignored.
inline EmbeddingMatrix build_bow(const LabeledDataset& ds, const VocabIndex& vocab) {
  const auto& texts = detail::require_texts(ds);
  if (vocab.size() == 0) throw ValidationError("bag-of-words vocabulary is empty");
  EmbeddingMatrix m(ds.size(), vocab.size());
  for (std::size_t r = 0; r < texts.size(); ++r) {
    for (const auto& tok : tokenize(texts[r])) {
      if (auto col = vocab.find(tok)) m(r, *col) += 1.0f;
    }
  }
  return m;
}

//! Raw term frequencies with the vocabulary taken from the whole dataset in
//! first-occurrence order.
inline std::pair<EmbeddingMatrix, VocabIndex> build_bow(const LabeledDataset& ds) {
  const auto& texts = detail::require_texts(ds);
  VocabIndex vocab;
  for (const auto& t : texts) {
    for (auto& tok : tokenize(t)) vocab.add(std::move(tok));
  }
  if (vocab.size() == 0) throw ValidationError("corpus is empty after tokenization");
  auto m = build_bow(ds, vocab);
  return {std::move(m), std::move(vocab)};
}

//! Mean of each document's token vectors, accumulated in double precision.
template <typename T>
Matrix<T> average_pool(std::span<const Matrix<T>> documents) {
  if (documents.empty()) throw ValidationError("average_pool needs at least one document");
  const std::size_t dim = documents.front().cols();
  Matrix<T> out(documents.size(), dim);
  std::vector<double> sum(dim);
  for (std::size_t i = 0; i < documents.size(); ++i) {
    const auto& doc = documents[i];
    if (doc.rows() == 0) {
      throw ValidationError("document " + std::to_string(i) + " has no token vectors");
    }
    if (doc.cols() != dim) {
      throw ValidationError("document " + std::to_string(i) + " has dimension " +
                            std::to_string(doc.cols()) + ", expected " + std::to_string(dim));
    }
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t t = 0; t < doc.rows(); ++t) {
      const auto tok = doc.row(t);
      for (std::size_t c = 0; c < dim; ++c) sum[c] += static_cast<double>(tok[c]);
    }
    const double m = static_cast<double>(doc.rows());
    for (std::size_t c = 0; c < dim; ++c) out(i, c) = static_cast<T>(sum[c] / m);
  }
  return out;
}

template <typename T>
Matrix<T> average_pool(const std::vector<Matrix<T>>& documents) {
  return average_pool(std::span<const Matrix<T>>(documents));
}

}  // namespace sam
