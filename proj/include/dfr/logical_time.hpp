/*
 * Copyright 2026 The dfr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace dfr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Coordinate value meaning "every value of this coordinate". It compares
/// above every concrete value, which makes wildcard-aware comparison the
/// ordinary comparison.
inline constexpr std::int64_t kWildcard = std::numeric_limits<std::int64_t>::max();

enum class DomainKind { Sequence, Epoch, Structured };
enum class OrderMode { Lexicographic, Product };

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::int64_t parse_int(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("malformed " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

inline std::int64_t parse_coord(std::string_view s) {
  if (s == "*") return kWildcard;
  auto v = parse_int(s, "coordinate");
  if (v < 0) throw Error("negative coordinate: '" + std::string(s) + "'");
  return v;
}

inline std::string coord_text(std::int64_t c) {
  return c == kWildcard ? std::string("*") : std::to_string(c);
}

inline bool valid_id(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

}  // namespace detail

/// The partial order shared by all times of one processor. Value type;
/// two domains are the same domain iff they compare equal.
class TimeDomain {
 public:
  TimeDomain() = default;

  static TimeDomain sequence(std::vector<std::string> edges) {
    TimeDomain d;
    d.kind_ = DomainKind::Sequence;
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto& e : edges) {
      if (!detail::valid_id(e)) throw Error("invalid edge id in sequence domain: '" + e + "'");
    }
    d.edges_ = std::move(edges);
    return d;
  }

  static TimeDomain epochs() { return TimeDomain{}; }

  static TimeDomain structured(std::size_t depth, OrderMode mode = OrderMode::Lexicographic) {
    TimeDomain d;
    d.kind_ = DomainKind::Structured;
    d.depth_ = depth;
    d.mode_ = mode;
    return d;
  }

  DomainKind kind() const noexcept { return kind_; }
  std::size_t depth() const noexcept { return depth_; }
  OrderMode mode() const noexcept { return mode_; }
  const std::vector<std::string>& edges() const noexcept { return edges_; }

  /// Number of integer coordinates carried by a time of this domain.
  std::size_t arity() const noexcept { return kind_ == DomainKind::Structured ? depth_ + 1 : 1; }

  bool has_edge(std::string_view e) const {
    return std::binary_search(edges_.begin(), edges_.end(), e);
  }

  bool totally_ordered() const noexcept {
    switch (kind_) {
      case DomainKind::Epoch: return true;
      case DomainKind::Structured: return mode_ == OrderMode::Lexicographic || depth_ == 0;
      case DomainKind::Sequence: return edges_.size() <= 1;
    }
    return false;
  }

  std::string to_string() const {
    switch (kind_) {
      case DomainKind::Epoch: return "epoch";
      case DomainKind::Structured:
        return "tuple:" + std::to_string(depth_) + (mode_ == OrderMode::Lexicographic ? ":lex" : ":product");
      case DomainKind::Sequence: {
        std::string s = "seq:";
        for (std::size_t i = 0; i < edges_.size(); ++i) {
          if (i) s += ',';
          s += edges_[i];
        }
        return s;
      }
    }
    return {};
  }

  /// Parses `epoch`, `seq:<e1>,<e2>`, `tuple:<depth>[:lex|:product]`.
  static TimeDomain parse(std::string_view text) {
    if (text == "epoch") return epochs();
    if (text.rfind("seq:", 0) == 0) {
      auto rest = text.substr(4);
      if (rest.empty()) return sequence({});
      return sequence(detail::split(rest, ','));
    }
    if (text == "seq") return sequence({});
    if (text.rfind("tuple:", 0) == 0) {
      auto parts = detail::split(text.substr(6), ':');
      auto depth = detail::parse_int(parts[0], "loop depth");
      if (depth < 0) throw Error("negative loop depth");
      OrderMode mode = OrderMode::Lexicographic;
      if (parts.size() == 2) {
        if (parts[1] == "product") mode = OrderMode::Product;
        else if (parts[1] != "lex") throw Error("unknown ordering mode '" + parts[1] + "'");
      } else if (parts.size() > 2) {
        throw Error("malformed domain '" + std::string(text) + "'");
      }
      return structured(static_cast<std::size_t>(depth), mode);
    }
    throw Error("unknown time domain '" + std::string(text) + "'");
  }

  friend bool operator==(const TimeDomain&, const TimeDomain&) = default;

 private:
  DomainKind kind_ = DomainKind::Epoch;
  std::size_t depth_ = 0;
  OrderMode mode_ = OrderMode::Lexicographic;
  std::vector<std::string> edges_;
};

/// A logical time. Sequence times carry the edge id and one coordinate
/// (the sequence number); epochs carry one coordinate; structured times
/// carry the epoch followed by loop counters. Coordinates equal to
/// kWildcard only appear inside frontier elements.
struct LogicalTime {
  std::string edge;
  std::vector<std::int64_t> coords;

  static LogicalTime seq(std::string edge, std::int64_t n) { return {std::move(edge), {n}}; }
  static LogicalTime epoch(std::int64_t e) { return {{}, {e}}; }
  static LogicalTime tuple(std::int64_t e, std::vector<std::int64_t> counters) {
    LogicalTime t;
    t.coords.reserve(counters.size() + 1);
    t.coords.push_back(e);
    t.coords.insert(t.coords.end(), counters.begin(), counters.end());
    return t;
  }

  bool has_wildcard() const {
    return std::find(coords.begin(), coords.end(), kWildcard) != coords.end();
  }

  friend bool operator==(const LogicalTime&, const LogicalTime&) = default;
  friend auto operator<=>(const LogicalTime& a, const LogicalTime& b) {
    return std::tie(a.edge, a.coords) <=> std::tie(b.edge, b.coords);
  }
};

enum class Order { LessEqual, Greater, Incomparable };

/// Throws unless `t` is well-formed for `d`.
inline void check_time(const TimeDomain& d, const LogicalTime& t) {
  if (t.coords.size() != d.arity()) {
    throw Error("time has " + std::to_string(t.coords.size()) + " coordinates, domain " + d.to_string() +
                " expects " + std::to_string(d.arity()));
  }
  if (d.kind() == DomainKind::Sequence) {
    if (!d.has_edge(t.edge)) {
      throw Error("domain mismatch: edge '" + t.edge + "' not in domain " + d.to_string());
    }
  } else if (!t.edge.empty()) {
    throw Error("domain mismatch: sequence time used in domain " + d.to_string());
  }
  for (auto c : t.coords) {
    if (c < 0) throw Error("negative coordinate in time");
  }
}

namespace detail {

inline bool leq_unchecked(const TimeDomain& d, const LogicalTime& a, const LogicalTime& b) {
  switch (d.kind()) {
    case DomainKind::Sequence:
      return a.edge == b.edge && a.coords[0] <= b.coords[0];
    case DomainKind::Epoch:
      return a.coords[0] <= b.coords[0];
    case DomainKind::Structured:
      if (d.mode() == OrderMode::Lexicographic) return a.coords <= b.coords;
      for (std::size_t i = 0; i < a.coords.size(); ++i) {
        if (a.coords[i] > b.coords[i]) return false;
      }
      return true;
  }
  return false;
}

}  // namespace detail

/// Three-way partial-order comparison of two times of domain `d`.
inline Order compare(const TimeDomain& d, const LogicalTime& a, const LogicalTime& b) {
  check_time(d, a);
  check_time(d, b);
  if (detail::leq_unchecked(d, a, b)) return Order::LessEqual;
  if (detail::leq_unchecked(d, b, a)) return Order::Greater;
  return Order::Incomparable;
}

inline bool leq(const TimeDomain& d, const LogicalTime& a, const LogicalTime& b) {
  return compare(d, a, b) == Order::LessEqual;
}

inline std::string to_string(const TimeDomain& d, const LogicalTime& t) {
  switch (d.kind()) {
    case DomainKind::Sequence: return "seq:" + t.edge + ":" + detail::coord_text(t.coords.at(0));
    case DomainKind::Epoch: return "epoch:" + detail::coord_text(t.coords.at(0));
    case DomainKind::Structured: {
      std::string s = "tuple:";
      for (std::size_t i = 0; i < t.coords.size(); ++i) {
        if (i) s += '.';
        s += detail::coord_text(t.coords[i]);
      }
      return s;
    }
  }
  return {};
}

/// Parses the canonical text form (`seq:<edge>:<n>`, `epoch:<n>`,
/// `tuple:<e>.<c1>...`) and checks it against `d`.
inline LogicalTime parse_time(const TimeDomain& d, std::string_view text) {
  LogicalTime t;
  if (text.rfind("seq:", 0) == 0) {
    auto parts = detail::split(text.substr(4), ':');
    if (parts.size() != 2) throw Error("malformed sequence time '" + std::string(text) + "'");
    t.edge = parts[0];
    t.coords = {detail::parse_coord(parts[1])};
  } else if (text.rfind("epoch:", 0) == 0) {
    t.coords = {detail::parse_coord(text.substr(6))};
  } else if (text.rfind("tuple:", 0) == 0) {
    for (const auto& p : detail::split(text.substr(6), '.')) t.coords.push_back(detail::parse_coord(p));
  } else {
    throw Error("malformed time '" + std::string(text) + "'");
  }
  if (d.kind() == DomainKind::Sequence && text.rfind("seq:", 0) != 0) throw Error("domain mismatch: expected a sequence time, got '" + std::string(text) + "'");
  if (d.kind() == DomainKind::Epoch && text.rfind("epoch:", 0) != 0) throw Error("domain mismatch: expected an epoch time, got '" + std::string(text) + "'");
  if (d.kind() == DomainKind::Structured && text.rfind("tuple:", 0) != 0) throw Error("domain mismatch: expected a tuple time, got '" + std::string(text) + "'");
  check_time(d, t);
  return t;
}

/// A downward-closed set of times of one domain, stored as the canonical
/// antichain of its maximal elements. TOP and EMPTY are distinguished.
class Frontier {
 public:
  Frontier() = default;

  static Frontier empty(TimeDomain d) {
    Frontier f;
    f.domain_ = std::move(d);
    return f;
  }

  static Frontier top(TimeDomain d) {
    Frontier f;
    f.domain_ = std::move(d);
    f.top_ = true;
    return f;
  }

  /// Smallest frontier containing every time in `times`.
  static Frontier down_close(TimeDomain d, std::span<const LogicalTime> times) {
    Frontier f;
    f.domain_ = std::move(d);
    for (const auto& t : times) check_time(f.domain_, t);
    f.elements_.assign(times.begin(), times.end());
    f.canonicalize();
    return f;
  }

  static Frontier down_close(TimeDomain d, std::initializer_list<LogicalTime> times) {
    return down_close(std::move(d), std::span<const LogicalTime>(times.begin(), times.size()));
  }

  const TimeDomain& domain() const noexcept { return domain_; }
  bool is_top() const noexcept { return top_; }
  bool is_empty() const noexcept { return !top_ && elements_.empty(); }
  const std::vector<LogicalTime>& elements() const noexcept { return elements_; }

  bool contains(const LogicalTime& t) const {
    check_time(domain_, t);
    if (top_) return true;
    return std::any_of(elements_.begin(), elements_.end(),
                       [&](const LogicalTime& m) { return detail::leq_unchecked(domain_, t, m); });
  }

  bool subset_of(const Frontier& other) const {
    require_same_domain(other);
    if (other.top_ || is_empty()) return true;
    if (top_) return false;
    return std::all_of(elements_.begin(), elements_.end(), [&](const LogicalTime& a) {
      return std::any_of(other.elements_.begin(), other.elements_.end(),
                         [&](const LogicalTime& b) { return detail::leq_unchecked(domain_, a, b); });
    });
  }

  bool strict_subset_of(const Frontier& other) const { return subset_of(other) && !(*this == other); }

  Frontier unite(const Frontier& other) const {
    require_same_domain(other);
    if (top_ || other.top_) return top(domain_);
    Frontier f = *this;
    f.elements_.insert(f.elements_.end(), other.elements_.begin(), other.elements_.end());
    f.canonicalize();
    return f;
  }

  Frontier intersect(const Frontier& other) const {
    require_same_domain(other);
    if (top_) return other;
    if (other.top_) return *this;
    Frontier f = empty(domain_);
    for (const auto& a : elements_) {
      for (const auto& b : other.elements_) {
        if (auto m = meet(a, b)) f.elements_.push_back(std::move(*m));
      }
    }
    f.canonicalize();
    return f;
  }

  std::string to_string() const {
    if (top_) return "TOP";
    if (elements_.empty()) return "EMPTY";
    std::string s = "{";
    for (std::size_t i = 0; i < elements_.size(); ++i) {
      if (i) s += ',';
      s += dfr::to_string(domain_, elements_[i]);
    }
    return s + "}";
  }

  static Frontier parse(const TimeDomain& d, std::string_view text) {
    if (text == "TOP") return top(d);
    if (text == "EMPTY") return empty(d);
    if (text.size() < 2 || text.front() != '{' || text.back() != '}') {
      throw Error("malformed frontier '" + std::string(text) + "'");
    }
    auto body = text.substr(1, text.size() - 2);
    std::vector<LogicalTime> ts;
    if (!body.empty()) {
      for (const auto& p : detail::split(body, ',')) ts.push_back(parse_time(d, p));
    }
    return down_close(d, ts);
  }

  friend bool operator==(const Frontier& a, const Frontier& b) {
    return a.domain_ == b.domain_ && a.top_ == b.top_ && a.elements_ == b.elements_;
  }

 private:
  void require_same_domain(const Frontier& other) const {
    if (!(domain_ == other.domain_)) {
      throw Error("domain mismatch: " + domain_.to_string() + " vs " + other.domain_.to_string());
    }
  }

  std::optional<LogicalTime> meet(const LogicalTime& a, const LogicalTime& b) const {
    switch (domain_.kind()) {
      case DomainKind::Sequence:
        if (a.edge != b.edge) return std::nullopt;
        return LogicalTime::seq(a.edge, std::min(a.coords[0], b.coords[0]));
      case DomainKind::Epoch:
        return LogicalTime::epoch(std::min(a.coords[0], b.coords[0]));
      case DomainKind::Structured:
        if (domain_.mode() == OrderMode::Lexicographic) return std::min(a, b);
        {
          LogicalTime m = a;
          for (std::size_t i = 0; i < m.coords.size(); ++i) m.coords[i] = std::min(a.coords[i], b.coords[i]);
          return m;
        }
    }
    return std::nullopt;
  }

  void canonicalize() {
    if (top_) {
      elements_.clear();
      return;
    }
    const bool lex = domain_.kind() == DomainKind::Structured && domain_.mode() == OrderMode::Lexicographic;
    std::vector<LogicalTime> kept;
    for (auto& t : elements_) {
      // Sequence number 0 denotes "no messages".
      if (domain_.kind() == DomainKind::Sequence && t.coords[0] < 1) continue;
      if (lex) {
        auto it = std::find(t.coords.begin(), t.coords.end(), kWildcard);
        if (it != t.coords.end()) std::fill(it, t.coords.end(), kWildcard);
      }
      if (domain_.kind() != DomainKind::Sequence &&
          std::all_of(t.coords.begin(), t.coords.end(), [](auto c) { return c == kWildcard; })) {
        top_ = true;
        elements_.clear();
        return;
      }
      if (lex && t.coords[0] == kWildcard) {
        top_ = true;
        elements_.clear();
        return;
      }
      kept.push_back(std::move(t));
    }
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    std::vector<LogicalTime> maximal;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      bool dominated = false;
      for (std::size_t j = 0; j < kept.size() && !dominated; ++j) {
        if (i != j && detail::leq_unchecked(domain_, kept[i], kept[j])) dominated = true;
      }
      if (!dominated) maximal.push_back(kept[i]);
    }
    if (domain_.kind() == DomainKind::Sequence && !domain_.edges().empty() &&
        maximal.size() == domain_.edges().size() &&
        std::all_of(maximal.begin(), maximal.end(), [](const LogicalTime& t) { return t.coords[0] == kWildcard; })) {
      top_ = true;
      maximal.clear();
    }
    elements_ = std::move(maximal);
  }

  TimeDomain domain_;
  bool top_ = false;
  std::vector<LogicalTime> elements_;
};

/// Frontier {t' : t' <= t for some t in `times`}.
inline Frontier downward_close(const TimeDomain& d, std::span<const LogicalTime> times) {
  return Frontier::down_close(d, times);
}

inline bool frontier_contains(const Frontier& f, const LogicalTime& t) { return f.contains(t); }
inline bool frontier_subset(const Frontier& a, const Frontier& b) { return a.subset_of(b); }
inline Frontier frontier_union(const Frontier& a, const Frontier& b) { return a.unite(b); }
inline Frontier frontier_intersect(const Frontier& a, const Frontier& b) { return a.intersect(b); }

}  // namespace dfr
