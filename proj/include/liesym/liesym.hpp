// Umbrella header.

#pragma once

#include "liesym/expr.hpp"
#include "liesym/detsys.hpp"
#include "liesym/jet.hpp"
#include "liesym/giforms.hpp"
#include "liesym/liestruct.hpp"
#include "liesym/isoclass.hpp"
#include "liesym/scan.hpp"
#include "liesym/io.hpp"
