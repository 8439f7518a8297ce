#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "qcoll/market_surface.hpp"

namespace qcoll {

// A setup with one surface per asset, as read from a market file.
struct Market {
  MarketSetup setup;
  VolSurface equity;
  VolSurface fx;

  // Same surfaces, different correlation.
  Market with_rho(double rho) const;
};

// Parses
//   { "setup": {spot_S, spot_X, r_F, r_D, div_yield, rho},
//     "surfaces": [ {"asset": "EQ"|"FX",
//                    "pillars": [ {T, params: {atm_vol, skew, curvature}, K_lo, K_hi} ]} ] }
// Syntax errors carry line and column, schema errors the JSON path of the
// offending value. Both throw InputError; surface validation errors propagate.
Market parse_market(std::string_view text, std::string_view source = "<market>");
Market load_market(const std::filesystem::path& path);

}  // namespace qcoll
