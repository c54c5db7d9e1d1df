#pragma once

// Ulam-Harris labels. The ancestor is the empty path; (x1, ..., xn) is the
// xn-th child of ... of the x1-th child of the ancestor.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <set>
#include <string>
#include <vector>

namespace branching {

class Label {
 public:
  using Entry = std::uint32_t;

  Label() = default;
  Label(std::initializer_list<Entry> path);
  explicit Label(std::vector<Entry> path);

  const std::vector<Entry>& path() const noexcept { return path_; }
  std::size_t generation() const noexcept { return path_.size(); }
  bool is_root() const noexcept { return path_.empty(); }

  /// The k-th child of this individual (k >= 1).
  Label child(Entry k) const;
  Label concat(const Label& tail) const;

  /// "e" for the ancestor, otherwise dot-separated entries.
  std::string to_string() const;

  friend bool operator==(const Label&, const Label&) = default;
  /// Generation first, then lexicographic on entries.
  friend std::strong_ordering operator<=>(const Label& a, const Label& b);

 private:
  std::vector<Entry> path_;
};

using LabelSet = std::set<Label>;

/// Drops the last entry; mother(e) == e.
Label mother(const Label& x);
/// Last entry; 0 for the ancestor.
Label::Entry rank(const Label& x);
std::size_t generation(const Label& x);

/// True iff y is a prefix of x (every label stems from itself).
bool stems_from(const Label& x, const Label& y);
bool in_direct_line(const Label& x, const Label& y);

/// No two distinct members are in direct line of descent.
bool is_line(const LabelSet& members);

/// Every label of the finite realised tree is in direct line with some member.
/// Throws Error(InvalidArgument) when `realised` is not prefix-closed.
bool is_covering_on(const LabelSet& members, const LabelSet& realised);

/// Labels of `universe` that stem from some member.
LabelSet progeny_of(const LabelSet& members, const LabelSet& universe);

}  // namespace branching
