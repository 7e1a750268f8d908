#include <catch2/catch_amalgamated.hpp>
#include "liesym/liesym.hpp"
TEST_CASE("placeholder test_giforms") { REQUIRE(true); }
