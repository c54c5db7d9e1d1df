#include "branching/label.hpp"

#include <algorithm>
#include <utility>

#include "branching/error.hpp"

namespace branching {

namespace {

void check_entries(const std::vector<Label::Entry>& path) {
  if (std::find(path.begin(), path.end(), 0u) != path.end()) {
    throw Error(ErrorCode::InvalidArgument, "label entries must be positive");
  }
}

}  // namespace

Label::Label(std::initializer_list<Entry> path) : path_(path) {
  check_entries(path_);
}

Label::Label(std::vector<Entry> path) : path_(std::move(path)) {
  check_entries(path_);
}

Label Label::child(Entry k) const {
  if (k == 0) {
    throw Error(ErrorCode::InvalidArgument, "child rank must be positive");
  }
  Label out = *this;
  out.path_.push_back(k);
  return out;
}

Label Label::concat(const Label& tail) const {
  Label out = *this;
  out.path_.insert(out.path_.end(), tail.path_.begin(), tail.path_.end());
  return out;
}

std::string Label::to_string() const {
  if (path_.empty()) return "e";
  std::string out;
  for (std::size_t i = 0; i < path_.size(); ++i) {
    if (i != 0) out += '.';
    out += std::to_string(path_[i]);
  }
  return out;
}

std::strong_ordering operator<=>(const Label& a, const Label& b) {
  if (auto c = a.path_.size() <=> b.path_.size(); c != 0) return c;
  return std::lexicographical_compare_three_way(
      a.path_.begin(), a.path_.end(), b.path_.begin(), b.path_.end());
}

Label mother(const Label& x) {
  if (x.is_root()) return x;
  std::vector<Label::Entry> path(x.path().begin(), x.path().end() - 1);
  return Label(std::move(path));
}

Label::Entry rank(const Label& x) {
  return x.is_root() ? 0 : x.path().back();
}

std::size_t generation(const Label& x) { return x.generation(); }

bool stems_from(const Label& x, const Label& y) {
  const auto& xp = x.path();
  const auto& yp = y.path();
  return yp.size() <= xp.size() && std::equal(yp.begin(), yp.end(), xp.begin());
}

bool in_direct_line(const Label& x, const Label& y) {
  return stems_from(x, y) || stems_from(y, x);
}

namespace {

// True iff some proper ancestor of x belongs to `set`.
bool has_proper_ancestor_in(const Label& x, const LabelSet& set) {
  Label cur = x;
  while (!cur.is_root()) {
    cur = mother(cur);
    if (set.contains(cur)) return true;
  }
  return false;
}

}  // namespace

bool is_line(const LabelSet& members) {
  return std::none_of(members.begin(), members.end(), [&](const Label& x) {
    return has_proper_ancestor_in(x, members);
  });
}

bool is_covering_on(const LabelSet& members, const LabelSet& realised) {
  for (const auto& x : realised) {
    if (!x.is_root() && !realised.contains(mother(x))) {
      throw Error(ErrorCode::InvalidArgument,
                  "realised set is not prefix-closed: mother of " +
                      x.to_string() + " missing");
    }
  }
  if (!realised.empty() && !realised.contains(Label{})) {
    throw Error(ErrorCode::InvalidArgument,
                "realised set is not prefix-closed: ancestor missing");
  }

  // Every ancestor-or-self of a member is in direct line with that member.
  LabelSet above;
  for (const auto& y : members) {
    Label cur = y;
    above.insert(cur);
    while (!cur.is_root()) {
      cur = mother(cur);
      above.insert(cur);
    }
  }
  return std::all_of(realised.begin(), realised.end(), [&](const Label& x) {
    return above.contains(x) || has_proper_ancestor_in(x, members);
  });
}

LabelSet progeny_of(const LabelSet& members, const LabelSet& universe) {
  LabelSet out;
  for (const auto& x : universe) {
    if (members.contains(x) || has_proper_ancestor_in(x, members)) {
      out.insert(x);
    }
  }
  return out;
}

}  // namespace branching
