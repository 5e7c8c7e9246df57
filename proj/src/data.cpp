#include "advrank/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace advrank {

// ---------------------------------------------------------------------------
// RankingDataset

int RankingDataset::Query::num_docs() const {
  if (!items.empty()) {
    return static_cast<int>(items.size());
  }
  if (!doc_tokens.empty()) {
    return static_cast<int>(doc_tokens.size());
  }
  return static_cast<int>(features.rows());
}

Example RankingDataset::example(int query_idx, int doc_idx) const {
  const Query& q = queries[query_idx];
  Example e;
  switch (rep) {
    case Representation::JointFeatures:
      e.features_data = q.features.data() + doc_idx * feature_dim;
      e.features_size = feature_dim;
      break;
    case Representation::UserItemIds:
      e.user = q.user;
      e.item = q.items[doc_idx];
      break;
    case Representation::TokenSequences:
      e.query_tokens = &q.query_tokens;
      e.doc_tokens = &q.doc_tokens[doc_idx];
      break;
  }
  return e;
}

std::size_t RankingDataset::total_labeled() const {
  std::size_t n = 0;
  for (const Query& q : queries) {
    n += q.labeled.size();
  }
  return n;
}

// ---------------------------------------------------------------------------
// LETOR

namespace {

[[noreturn]] void letor_error(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("letor parse error at line " + std::to_string(line_no) + ": " + what);
}

double parse_double(const char* first, const char* last, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    letor_error(line_no, "bad numeric value '" + std::string(first, last) + "'");
  }
  return v;
}

}  // namespace

std::vector<LetorRecord> parse_letor(std::istream& in) {
  std::vector<LetorRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body{line};
    std::string doc_id;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) {
      std::string_view comment = body.substr(hash + 1);
      body = body.substr(0, hash);
      if (const auto pos = comment.find("docid"); pos != std::string_view::npos) {
        auto rest = comment.substr(pos + 5);
        while (!rest.empty() && (rest.front() == ' ' || rest.front() == '=')) {
          rest.remove_prefix(1);
        }
        const auto end = rest.find_first_of(" \t");
        doc_id = std::string(rest.substr(0, end));
      }
    }

    // Tokenize the pre-comment part.
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < body.size()) {
      while (i < body.size() && (body[i] == ' ' || body[i] == '\t' || body[i] == '\r')) {
        ++i;
      }
      std::size_t start = i;
      while (i < body.size() && body[i] != ' ' && body[i] != '\t' && body[i] != '\r') {
        ++i;
      }
      if (i > start) {
        tokens.push_back(body.substr(start, i - start));
      }
    }
    if (tokens.empty()) {
      continue;  // blank line
    }
    if (tokens.size() < 2) {
      letor_error(line_no, "expected '<rel> qid:<id> <idx>:<val>...'");
    }

    LetorRecord rec;
    int rel = 0;
    {
      const auto [ptr, ec] = std::from_chars(tokens[0].data(), tokens[0].data() + tokens[0].size(), rel);
      if (ec != std::errc() || ptr != tokens[0].data() + tokens[0].size()) {
        letor_error(line_no, "bad relevance '" + std::string(tokens[0]) + "'");
      }
    }
    if (rel < -1 || rel > 2) {
      letor_error(line_no, "relevance " + std::to_string(rel) + " outside {-1,0,1,2}");
    }
    rec.relevance = rel;

    if (tokens[1].substr(0, 4) != "qid:" || tokens[1].size() == 4) {
      letor_error(line_no, "missing qid token");
    }
    rec.query_id = std::string(tokens[1].substr(4));

    rec.features = Vec::Zero(kLetorFeatureDim);
    std::array<bool, kLetorFeatureDim> seen{};
    for (std::size_t t = 2; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        letor_error(line_no, "expected <idx>:<val>, got '" + std::string(tok) + "'");
      }
      int idx = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + colon, idx);
      if (ec != std::errc() || ptr != tok.data() + colon || idx < 1 || idx > kLetorFeatureDim) {
        letor_error(line_no, "bad feature index in '" + std::string(tok) + "'");
      }
      if (seen[idx - 1]) {
        letor_error(line_no, "duplicate feature index " + std::to_string(idx));
      }
      seen[idx - 1] = true;
      rec.features[idx - 1] =
          parse_double(tok.data() + colon + 1, tok.data() + tok.size(), line_no);
    }
    for (int f = 0; f < kLetorFeatureDim; ++f) {
      if (!seen[f]) {
        letor_error(line_no, "missing feature index " + std::to_string(f + 1));
      }
    }
    rec.doc_id = std::move(doc_id);
    records.push_back(std::move(rec));
  }
  return records;
}

std::string serialize_letor(const std::vector<LetorRecord>& records) {
  std::string out;
  for (const LetorRecord& r : records) {
    out += std::to_string(r.relevance);
    out += " qid:";
    out += r.query_id;
    for (int f = 0; f < kLetorFeatureDim; ++f) {
      out += ' ';
      out += std::to_string(f + 1);
      out += ':';
      out += format_shortest(r.features[f]);
    }
    if (!r.doc_id.empty()) {
      out += " #docid = ";
      out += r.doc_id;
    }
    out += '\n';
  }
  return out;
}

RankingDataset compile_letor_dataset(const std::vector<LetorRecord>& records, bool for_training) {
  RankingDataset ds;
  ds.rep = Representation::JointFeatures;
  ds.feature_dim = kLetorFeatureDim;

  std::unordered_map<std::string, std::size_t> query_index;
  std::vector<std::vector<const LetorRecord*>> rows;
  for (const LetorRecord& r : records) {
    auto [it, inserted] = query_index.try_emplace(r.query_id, rows.size());
    if (inserted) {
      rows.emplace_back();
    }
    rows[it->second].push_back(&r);
  }

  ds.queries.reserve(rows.size());
  std::vector<std::string> ids(rows.size());
  for (const auto& [qid, qi] : query_index) {
    ids[qi] = qid;
  }
  for (std::size_t qi = 0; qi < rows.size(); ++qi) {
    RankingDataset::Query q;
    q.id = ids[qi];
    const auto& docs = rows[qi];
    q.features.resize(static_cast<Index>(docs.size()), kLetorFeatureDim);
    q.doc_ids.reserve(docs.size());
    q.grades.reserve(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
      q.features.row(static_cast<Index>(d)) = docs[d]->features.transpose();
      q.doc_ids.push_back(docs[d]->doc_id);
      q.grades.push_back(std::max(docs[d]->relevance, 0));
      if (docs[d]->relevance >= 1) {
        q.labeled.push_back(static_cast<int>(d));
      } else {
        q.unlabeled.push_back(static_cast<int>(d));
      }
    }
    if (for_training && q.labeled.empty()) {
      continue;
    }
    ds.queries.push_back(std::move(q));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// MovieLens

MovielensData parse_movielens(std::istream& in) {
  MovielensData data;
  std::unordered_map<int, int> user_map;
  std::unordered_map<int, int> item_map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") {
      continue;
    }
    long long fields[4];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int f = 0; f < 4; ++f) {
      const auto [ptr, ec] = std::from_chars(p, end, fields[f]);
      if (ec != std::errc()) {
        throw std::runtime_error("movielens parse error at line " + std::to_string(line_no) +
                                 ": expected 4 tab-separated integers");
      }
      p = ptr;
      if (f < 3) {
        if (p == end || (*p != '\t' && *p != ' ')) {
          throw std::runtime_error("movielens parse error at line " + std::to_string(line_no) +
                                   ": expected 4 tab-separated integers");
        }
        ++p;
      }
    }
    if (fields[2] < 1 || fields[2] > 5) {
      throw std::runtime_error("movielens parse error at line " + std::to_string(line_no) +
                               ": rating " + std::to_string(fields[2]) + " outside [1,5]");
    }
    Interaction it;
    const int raw_user = static_cast<int>(fields[0]);
    const int raw_item = static_cast<int>(fields[1]);
    auto [uit, unew] = user_map.try_emplace(raw_user, static_cast<int>(data.user_ids.size()));
    if (unew) {
      data.user_ids.push_back(raw_user);
    }
    auto [iit, inew] = item_map.try_emplace(raw_item, static_cast<int>(data.item_ids.size()));
    if (inew) {
      data.item_ids.push_back(raw_item);
    }
    it.user = uit->second;
    it.item = iit->second;
    it.rating = static_cast<int>(fields[2]);
    it.timestamp = fields[3];
    data.interactions.push_back(it);
  }
  return data;
}

MovielensSplit compile_movielens_dataset(const MovielensData& data, double split_ratio,
                                         std::uint64_t seed) {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw std::invalid_argument("compile_movielens_dataset: split_ratio must be in (0,1)");
  }
  const int num_users = static_cast<int>(data.user_ids.size());
  const int num_items = static_cast<int>(data.item_ids.size());

  std::vector<std::size_t> labeled_idx;
  for (std::size_t i = 0; i < data.interactions.size(); ++i) {
    if (data.interactions[i].rating >= 4) {
      labeled_idx.push_back(i);
    }
  }
  Rng rng(seed);
  rng.shuffle(labeled_idx);
  const std::size_t n_train =
      static_cast<std::size_t>(std::ceil(split_ratio * static_cast<double>(labeled_idx.size())));

  std::vector<std::vector<int>> train_pos(num_users);
  std::vector<std::vector<int>> test_pos(num_users);
  for (std::size_t k = 0; k < labeled_idx.size(); ++k) {
    const Interaction& it = data.interactions[labeled_idx[k]];
    (k < n_train ? train_pos : test_pos)[it.user].push_back(it.item);
  }

  MovielensSplit split;
  for (RankingDataset* ds : {&split.train, &split.test}) {
    ds->rep = Representation::UserItemIds;
    ds->num_users = num_users;
    ds->num_items = num_items;
  }

  std::vector<char> is_train_pos(num_items);
  for (int u = 0; u < num_users; ++u) {
    std::fill(is_train_pos.begin(), is_train_pos.end(), 0);
    for (const int i : train_pos[u]) {
      is_train_pos[i] = 1;
    }

    if (!train_pos[u].empty()) {
      RankingDataset::Query q;
      q.id = std::to_string(data.user_ids[u]);
      q.user = u;
      q.items.resize(num_items);
      for (int i = 0; i < num_items; ++i) {
        q.items[i] = i;
        if (is_train_pos[i]) {
          q.labeled.push_back(i);
        } else {
          q.unlabeled.push_back(i);
        }
      }
      split.train.queries.push_back(std::move(q));
    } else {
      ++split.users_without_train_positives;
    }

    if (!test_pos[u].empty()) {
      RankingDataset::Query q;
      q.id = std::to_string(data.user_ids[u]);
      q.user = u;
      std::vector<char> is_test_pos(num_items, 0);
      for (const int i : test_pos[u]) {
        is_test_pos[i] = 1;
      }
      for (int i = 0; i < num_items; ++i) {
        if (is_train_pos[i]) {
          continue;  // candidates: items the user has no training interaction with
        }
        const int doc = static_cast<int>(q.items.size());
        q.items.push_back(i);
        q.grades.push_back(is_test_pos[i] ? 1.0 : 0.0);
        if (is_test_pos[i]) {
          q.labeled.push_back(doc);
        } else {
          q.unlabeled.push_back(doc);
        }
      }
      split.test.queries.push_back(std::move(q));
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// Label subsampling

RankingDataset subsample_labels(const RankingDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("subsample_labels: fraction must be in (0,1]");
  }
  if (fraction == 1.0) {
    return ds;
  }
  std::vector<std::pair<int, int>> all;  // (query index, position in labeled list)
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    for (std::size_t p = 0; p < ds.queries[qi].labeled.size(); ++p) {
      all.emplace_back(static_cast<int>(qi), static_cast<int>(p));
    }
  }
  Rng rng(seed);
  rng.shuffle(all);
  const std::size_t keep =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(all.size())));

  std::vector<std::vector<char>> kept(ds.queries.size());
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    kept[qi].assign(ds.queries[qi].labeled.size(), 0);
  }
  for (std::size_t k = 0; k < keep && k < all.size(); ++k) {
    kept[all[k].first][all[k].second] = 1;
  }

  RankingDataset out = ds;
  out.queries.clear();
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    RankingDataset::Query q = ds.queries[qi];
    std::vector<int> labeled;
    for (std::size_t p = 0; p < q.labeled.size(); ++p) {
      if (kept[qi][p]) {
        labeled.push_back(q.labeled[p]);
      }
    }
    if (labeled.empty()) {
      continue;
    }
    q.labeled = std::move(labeled);
    out.queries.push_back(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset cache (versioned little-endian binary container)

namespace {

constexpr char kCacheMagic[8] = {'A', 'D', 'V', 'R', 'K', 'D', 'S', '\x01'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) {
    throw std::runtime_error("dataset cache: truncated file");
  }
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) {
    throw std::runtime_error("dataset cache: truncated file");
  }
  return s;
}

template <typename T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  write_pod<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_vec(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  std::vector<T> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) {
    throw std::runtime_error("dataset cache: truncated file");
  }
  return v;
}

}  // namespace

void save_dataset_cache(const RankingDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_dataset_cache: cannot open " + path.string());
  }
  out.write(kCacheMagic, sizeof(kCacheMagic));
  write_pod(out, kCacheVersion);
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(ds.rep));
  write_pod<std::int32_t>(out, ds.feature_dim);
  write_pod<std::int32_t>(out, ds.num_users);
  write_pod<std::int32_t>(out, ds.num_items);
  write_pod<std::int32_t>(out, ds.vocab_size);
  write_pod<std::uint64_t>(out, ds.queries.size());
  for (const auto& q : ds.queries) {
    write_string(out, q.id);
    write_pod<std::int32_t>(out, q.user);
    write_vec(out, q.query_tokens);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(q.features.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(q.features.cols()));
    out.write(reinterpret_cast<const char*>(q.features.data()),
              static_cast<std::streamsize>(sizeof(double) * q.features.size()));
    write_vec(out, q.items);
    write_pod<std::uint64_t>(out, q.doc_ids.size());
    for (const auto& s : q.doc_ids) {
      write_string(out, s);
    }
    write_vec(out, q.grades);
    write_vec(out, q.labeled);
    write_vec(out, q.unlabeled);
    write_pod<std::uint64_t>(out, q.doc_tokens.size());
    for (const auto& t : q.doc_tokens) {
      write_vec(out, t);
    }
  }
  if (!out) {
    throw std::runtime_error("save_dataset_cache: write failed for " + path.string());
  }
}

RankingDataset load_dataset_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_dataset_cache: cannot open " + path.string());
  }
  char magic[sizeof(kCacheMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_dataset_cache: not a dataset cache file");
  }
  if (read_pod<std::uint32_t>(in) != kCacheVersion) {
    throw std::runtime_error("load_dataset_cache: unsupported cache version");
  }
  RankingDataset ds;
  ds.rep = static_cast<Representation>(read_pod<std::uint8_t>(in));
  ds.feature_dim = read_pod<std::int32_t>(in);
  ds.num_users = read_pod<std::int32_t>(in);
  ds.num_items = read_pod<std::int32_t>(in);
  ds.vocab_size = read_pod<std::int32_t>(in);
  const auto n_queries = read_pod<std::uint64_t>(in);
  ds.queries.resize(n_queries);
  for (auto& q : ds.queries) {
    q.id = read_string(in);
    q.user = read_pod<std::int32_t>(in);
    q.query_tokens = read_vec<int>(in);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    q.features.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    in.read(reinterpret_cast<char*>(q.features.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    q.items = read_vec<int>(in);
    const auto n_ids = read_pod<std::uint64_t>(in);
    q.doc_ids.resize(n_ids);
    for (auto& s : q.doc_ids) {
      s = read_string(in);
    }
    q.grades = read_vec<double>(in);
    q.labeled = read_vec<int>(in);
    q.unlabeled = read_vec<int>(in);
    const auto n_tok = read_pod<std::uint64_t>(in);
    q.doc_tokens.resize(n_tok);
    for (auto& t : q.doc_tokens) {
      t = read_vec<int>(in);
    }
    if (!in) {
      throw std::runtime_error("load_dataset_cache: truncated file");
    }
  }
  return ds;
}

void save_id_map(const MovielensData& data, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "advrank.idmap";
  j["version"] = 1;
  j["users"] = data.user_ids;
  j["items"] = data.item_ids;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_id_map: cannot open " + path.string());
  }
  out << j.dump(2) << '\n';
}

}  // namespace advrank
