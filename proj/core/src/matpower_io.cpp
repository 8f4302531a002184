#include "gridrelax/matpower_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "gridrelax/error.hpp"

namespace gridrelax {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string_view strip_comment(std::string_view line) {
    // '%' inside a quoted string is not a comment; none of the supported
    // fields are strings, so a quote simply suppresses comment detection.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\'') quoted = !quoted;
        if (line[i] == '%' && !quoted) return line.substr(0, i);
    }
    return line;
}

[[noreturn]] void malformed(int line, const std::string& what) {
    throw Error(ErrorCode::kMalformedRow, "line " + std::to_string(line) + ": " + what);
}

double parse_number(std::string_view tok, int line) {
    std::string_view t = tok;
    bool negative = false;
    if (!t.empty() && (t.front() == '+' || t.front() == '-')) {
        negative = t.front() == '-';
        t.remove_prefix(1);
    }
    if (t == "Inf" || t == "inf") return negative ? -kInf : kInf;
    double value = 0.0;
    // from_chars does not accept a leading '+'; the sign was stripped above.
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || std::isnan(value)) {
        malformed(line, "not a number: '" + std::string(tok) + "'");
    }
    return negative ? -value : value;
}

std::vector<double> parse_row(std::string_view text, int line) {
    std::vector<double> values;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == ',')) ++i;
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != ',') ++j;
        if (j > i) values.push_back(parse_number(text.substr(i, j - i), line));
        i = j;
    }
    return values;
}

enum class Section { kNone, kBus, kGen, kBranch, kGencost, kSkipMatrix, kSkipCell };

Section section_for(std::string_view field) {
    if (field == "bus") return Section::kBus;
    if (field == "gen") return Section::kGen;
    if (field == "branch") return Section::kBranch;
    if (field == "gencost") return Section::kGencost;
    return Section::kSkipMatrix;
}

std::vector<TableRow>* table_for(CaseFile& cf, Section s) {
    switch (s) {
        case Section::kBus: return &cf.bus_table;
        case Section::kGen: return &cf.gen_table;
        case Section::kBranch: return &cf.branch_table;
        case Section::kGencost: return &cf.gencost_table;
        default: return nullptr;
    }
}

void check_table(const std::vector<TableRow>& rows, std::size_t min_columns, const char* table) {
    if (rows.empty()) return;
    const std::size_t width = rows.front().values.size();
    for (const TableRow& row : rows) {
        if (row.values.size() != width) {
            malformed(row.line, std::string(table) + " row has " + std::to_string(row.values.size()) +
                                    " columns, expected " + std::to_string(width));
        }
        if (row.values.size() < min_columns) {
            malformed(row.line, std::string(table) + " row has " + std::to_string(row.values.size()) +
                                    " columns, expected at least " + std::to_string(min_columns));
        }
    }
}

void check_gencost(const std::vector<TableRow>& rows) {
    for (const TableRow& row : rows) {
        if (row.values.size() < 4) malformed(row.line, "gencost row is too short");
        const double model = row.values[0];
        if (model != 2.0) {
            throw Error(ErrorCode::kUnsupportedCost,
                        "line " + std::to_string(row.line) + ": gencost model " +
                            std::to_string(static_cast<int>(model)) + " (only polynomial model 2)");
        }
        const double n = row.values[3];
        if (n < 0.0 || n > 3.0 || n != std::floor(n)) {
            throw Error(ErrorCode::kUnsupportedCost,
                        "line " + std::to_string(row.line) + ": polynomial degree n must be 0..3");
        }
        if (row.values.size() < 4 + static_cast<std::size_t>(n)) {
            malformed(row.line, "gencost row has fewer coefficients than n");
        }
    }
}

bool angle_unconstrained(double deg) { return deg == 0.0 || std::abs(deg) >= 360.0; }

int as_id(double v, int line) {
    if (v != std::floor(v)) malformed(line, "bus id is not an integer");
    return static_cast<int>(v);
}

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    if (v == 0.0) return "0";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
    return std::string(buf, ptr);
}

}  // namespace

CaseFile parse_case(std::string_view text) {
    CaseFile cf;
    bool have_base = false;
    Section section = Section::kNone;
    int line_no = 0;
    std::size_t pos = 0;

    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        const std::string_view raw =
            text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        std::string_view line = trim(strip_comment(raw));
        if (line.empty()) continue;

        if (section == Section::kSkipCell) {
            if (line.find('}') != std::string_view::npos) section = Section::kNone;
            continue;
        }
        if (section != Section::kNone) {
            // Inside a matrix: rows end at ';' or end of line, ']' closes it.
            const std::size_t close = line.find(']');
            std::string_view body = close == std::string_view::npos ? line : line.substr(0, close);
            if (auto* table = table_for(cf, section)) {
                std::size_t start = 0;
                while (start <= body.size()) {
                    const std::size_t semi = body.find(';', start);
                    const std::string_view piece = trim(body.substr(
                        start, semi == std::string_view::npos ? std::string_view::npos : semi - start));
                    if (!piece.empty()) table->push_back({line_no, parse_row(piece, line_no)});
                    if (semi == std::string_view::npos) break;
                    start = semi + 1;
                }
            }
            if (close != std::string_view::npos) section = Section::kNone;
            continue;
        }

        if (line.starts_with("function")) {
            const std::size_t eq = line.find('=');
            if (eq != std::string_view::npos) cf.name = std::string(trim(line.substr(eq + 1)));
            continue;
        }
        if (!line.starts_with("mpc.")) continue;

        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) continue;
        const std::string_view field = trim(line.substr(4, eq - 4));
        std::string_view rhs = trim(line.substr(eq + 1));

        if (field == "baseMVA") {
            if (rhs.ends_with(';')) rhs.remove_suffix(1);
            cf.base_mva = parse_number(trim(rhs), line_no);
            have_base = true;
            continue;
        }
        if (rhs.starts_with('{')) {
            section = rhs.find('}') == std::string_view::npos ? Section::kSkipCell : Section::kNone;
            continue;
        }
        if (!rhs.starts_with('[')) continue;

        const Section target = section_for(field);
        rhs.remove_prefix(1);
        const std::size_t close = rhs.find(']');
        std::string_view body = close == std::string_view::npos ? rhs : rhs.substr(0, close);
        if (auto* table = table_for(cf, target)) {
            std::size_t start = 0;
            while (start <= body.size()) {
                const std::size_t semi = body.find(';', start);
                const std::string_view piece = trim(body.substr(
                    start, semi == std::string_view::npos ? std::string_view::npos : semi - start));
                if (!piece.empty()) table->push_back({line_no, parse_row(piece, line_no)});
                if (semi == std::string_view::npos) break;
                start = semi + 1;
            }
        }
        section = close == std::string_view::npos ? target : Section::kNone;
    }

    if (!have_base) throw Error(ErrorCode::kMissingField, "mpc.baseMVA is missing");
    if (cf.bus_table.empty()) throw Error(ErrorCode::kMissingField, "mpc.bus is missing or empty");
    check_table(cf.bus_table, kBusColumns, "bus");
    check_table(cf.gen_table, kGenColumns, "gen");
    check_table(cf.branch_table, kBranchColumns, "branch");
    check_gencost(cf.gencost_table);
    if (cf.gencost_table.size() < cf.gen_table.size()) {
        throw Error(ErrorCode::kMissingField, "mpc.gencost needs one row per generator");
    }
    return cf;
}

Network to_network(const CaseFile& cf) {
    Network net;
    net.name = cf.name;
    net.base_mva = cf.base_mva;
    if (!(cf.base_mva > 0.0)) throw Error(ErrorCode::kInvalidNetwork, "baseMVA must be positive");
    const double base = cf.base_mva;

    std::set<int> ids;
    bool have_ref = false;
    for (const TableRow& row : cf.bus_table) {
        const auto& v = row.values;
        Bus bus;
        bus.id = as_id(v[0], row.line);
        if (!ids.insert(bus.id).second) {
            throw Error(ErrorCode::kDuplicateId,
                        "line " + std::to_string(row.line) + ": bus id " + std::to_string(bus.id));
        }
        bus.pd = v[2] / base;
        bus.qd = v[3] / base;
        bus.gs = v[4] / base;
        bus.bs = v[5] / base;
        bus.vmax = v[11];
        bus.vmin = v[12];
        if (v[1] == 3.0) {
            if (have_ref) {
                throw Error(ErrorCode::kInvalidNetwork,
                            "line " + std::to_string(row.line) + ": more than one reference bus");
            }
            have_ref = true;
            net.reference_bus = bus.id;
        }
        net.buses.push_back(bus);
    }
    if (!have_ref) throw Error(ErrorCode::kNoReference, "no bus of type 3");

    for (std::size_t g = 0; g < cf.gen_table.size(); ++g) {
        const auto& v = cf.gen_table[g].values;
        if (v[7] == 0.0) continue;
        Generator gen;
        gen.bus = as_id(v[0], cf.gen_table[g].line);
        gen.qmax = v[3] / base;
        gen.qmin = v[4] / base;
        gen.pmax = v[8] / base;
        gen.pmin = v[9] / base;
        const auto& c = cf.gencost_table[g].values;
        const auto n = static_cast<std::size_t>(c[3]);
        // Coefficients are listed highest order first; pad to (c2, c1, c0).
        double coeff[3] = {0.0, 0.0, 0.0};
        for (std::size_t k = 0; k < n; ++k) coeff[3 - n + k] = c[4 + k];
        gen.c2 = coeff[0];
        gen.c1 = coeff[1];
        gen.c0 = coeff[2];
        net.generators.push_back(gen);
    }

    for (const TableRow& row : cf.branch_table) {
        const auto& v = row.values;
        if (v[10] == 0.0) continue;
        Branch br;
        br.from_bus = as_id(v[0], row.line);
        br.to_bus = as_id(v[1], row.line);
        br.r = v[2];
        br.x = v[3];
        br.b_charge = v[4];
        if (v[5] != 0.0) br.s_max = v[5] / base;
        br.tap = v[8] == 0.0 ? 1.0 : v[8];
        br.shift = v[9] * kDegToRad;
        br.angle_min = angle_unconstrained(v[11]) ? -kMaxAngleLimit : clamp_angle_limit(v[11] * kDegToRad);
        br.angle_max = angle_unconstrained(v[12]) ? kMaxAngleLimit : clamp_angle_limit(v[12] * kDegToRad);
        net.branches.push_back(br);
    }
    return net;
}

std::string serialize(const Network& net) {
    const double base = net.base_mva;
    std::ostringstream os;
    auto row = [&os](std::initializer_list<double> values) {
        os << '\t';
        bool first = true;
        for (double v : values) {
            if (!first) os << '\t';
            os << format_number(v);
            first = false;
        }
        os << ";\n";
    };

    os << "function mpc = " << (net.name.empty() ? "case" : net.name) << "\n";
    os << "mpc.version = '2';\n";
    os << "mpc.baseMVA = " << format_number(base) << ";\n\n";

    os << "%% bus data\n";
    os << "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
    os << "mpc.bus = [\n";
    for (const Bus& bus : net.buses) {
        const double type = bus.id == net.reference_bus ? 3.0 : (net.generators_at(bus.id).empty() ? 1.0 : 2.0);
        row({static_cast<double>(bus.id), type, bus.pd * base, bus.qd * base, bus.gs * base, bus.bs * base, 1.0,
             1.0, 0.0, 0.0, 1.0, bus.vmax, bus.vmin});
    }
    os << "];\n\n";

    os << "%% generator data\n";
    os << "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
    os << "mpc.gen = [\n";
    for (const Generator& gen : net.generators) {
        row({static_cast<double>(gen.bus), 0.0, 0.0, gen.qmax * base, gen.qmin * base, 1.0, base, 1.0,
             gen.pmax * base, gen.pmin * base});
    }
    os << "];\n\n";

    os << "%% branch data\n";
    os << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
    os << "mpc.branch = [\n";
    for (const Branch& br : net.branches) {
        const double rate = br.s_max ? *br.s_max * base : 0.0;
        const double ratio = br.tap == 1.0 ? 0.0 : br.tap;
        row({static_cast<double>(br.from_bus), static_cast<double>(br.to_bus), br.r, br.x, br.b_charge, rate, rate,
             rate, ratio, br.shift / kDegToRad, 1.0, br.angle_min / kDegToRad, br.angle_max / kDegToRad});
    }
    os << "];\n\n";

    os << "%% generator cost data\n";
    os << "%\t2\tstartup\tshutdown\tn\tc2\tc1\tc0\n";
    os << "mpc.gencost = [\n";
    for (const Generator& gen : net.generators) row({2.0, 0.0, 0.0, 3.0, gen.c2, gen.c1, gen.c0});
    os << "];\n";
    return os.str();
}

Network load_case(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    Network net = to_network(parse_case(buf.str()));
    if (net.name.empty()) net.name = path.stem().string();
    return net;
}

void save_case(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    out << serialize(net);
}

}  // namespace gridrelax
