#pragma once

// Reader/writer for the subset of the Matpower case format that carries
// every quantity of the network model.
//
// Column order (extra trailing columns are accepted and ignored):
//   bus     bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin
//   gen     bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin
//   branch  fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax
//   gencost model startup shutdown n c(n-1) ... c0   (model 2, n <= 3)

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gridrelax/network.hpp"

namespace gridrelax {

struct TableRow {
    int line = 0;
    std::vector<double> values;
};

struct CaseFile {
    std::string name;
    double base_mva = 0.0;
    std::vector<TableRow> bus_table;
    std::vector<TableRow> gen_table;
    std::vector<TableRow> branch_table;
    std::vector<TableRow> gencost_table;
};

inline constexpr std::size_t kBusColumns = 13;
inline constexpr std::size_t kGenColumns = 10;
inline constexpr std::size_t kBranchColumns = 13;

/// Parse case text. Throws Error with kMissingField, kMalformedRow (message
/// carries the line number) or kUnsupportedCost.
CaseFile parse_case(std::string_view text);

/// Map raw tables onto the per-unit model. Throws kNoReference, kDuplicateId
/// or kInvalidNetwork.
Network to_network(const CaseFile& cf);

/// Canonical case text for `net`; numbers carry 12 significant digits.
std::string serialize(const Network& net);

Network load_case(const std::filesystem::path& path);
void save_case(const Network& net, const std::filesystem::path& path);

enum class Fixture { kCase3Base, kCase3Tight };

/// Embedded copies of the three-bus case (30 and 18 degree angle limits).
std::string_view fixture_text(Fixture which);
Network load_fixture(Fixture which);

}  // namespace gridrelax
