#include "branching/error.hpp"
#include "branching/label.hpp"
#include "doctest.h"

using namespace branching;

TEST_CASE("mother drops the last entry") {
  CHECK(mother(Label{1, 2, 3}) == Label{1, 2});
  CHECK(mother(Label{}) == Label{});
  CHECK(mother(Label{7}) == Label{});
}

TEST_CASE("rank and generation") {
  CHECK(rank(Label{1, 2, 3}) == 3);
  CHECK(rank(Label{}) == 0);
  CHECK(rank(Label{5}) == 5);
  CHECK(generation(Label{}) == 0);
  CHECK(generation(Label{1, 2, 3}) == 3);
  CHECK(generation(Label{9, 9}) == 2);
}

TEST_CASE("labels reject zero entries") {
  CHECK_THROWS_AS(Label({1, 0}), Error);
  CHECK_THROWS_AS(Label{}.child(0), Error);
}

TEST_CASE("stems_from and direct line") {
  CHECK(stems_from(Label{1, 2, 3}, Label{1, 2}));
  CHECK(stems_from(Label{1, 2}, Label{1, 2}));
  CHECK_FALSE(stems_from(Label{1, 2}, Label{2}));
  CHECK(in_direct_line(Label{1}, Label{1, 4}));
  CHECK(in_direct_line(Label{1, 4}, Label{1}));
  CHECK_FALSE(in_direct_line(Label{1}, Label{2}));
  CHECK(in_direct_line(Label{}, Label{3, 1, 4}));
  CHECK(in_direct_line(Label{3, 1, 4}, Label{}));
}

TEST_CASE("lines") {
  CHECK(is_line({Label{1}, Label{2}, Label{3}}));
  CHECK_FALSE(is_line({Label{1}, Label{1, 1}}));
  CHECK(is_line({}));
  CHECK(is_line({Label{}}));
}

TEST_CASE("covering lines on a realised tree") {
  const LabelSet realised{Label{}, Label{1}, Label{2}, Label{1, 1}};
  CHECK(is_covering_on({Label{1}, Label{2}}, realised));
  CHECK_FALSE(is_covering_on({Label{1}}, {Label{}, Label{1}, Label{2}}));
  CHECK_FALSE(is_covering_on({}, {Label{}}));
  CHECK(is_covering_on({Label{}}, realised));
  CHECK_THROWS_AS(is_covering_on({Label{1}}, {Label{}, Label{1, 1}}), Error);
}

TEST_CASE("progeny_of filters by prefix") {
  const LabelSet universe{Label{}, Label{1}, Label{1, 1}, Label{2}};
  CHECK(progeny_of({Label{1}}, universe) == LabelSet{Label{1}, Label{1, 1}});
  CHECK(progeny_of({Label{}}, universe) == universe);
  CHECK(progeny_of({}, universe).empty());
}

TEST_CASE("label order is generation first, then lexicographic") {
  CHECK(Label{} < Label{1});
  CHECK(Label{2} < Label{1, 1});
  CHECK(Label{1, 2} < Label{2, 1});
  CHECK(Label{1, 10} > Label{1, 9});
}

TEST_CASE("label text") {
  CHECK(Label{}.to_string() == "e");
  CHECK(Label{1, 2, 3}.to_string() == "1.2.3");
  CHECK(Label{1}.child(4).concat(Label{2}) == Label{1, 4, 2});
}
