#pragma once

#include <algorithm>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nsmpb/core.hpp"

namespace nsmpb {

/// A fixed partial charge of the solute.
struct Atom {
    Vec3 position;            ///< A
    double charge_number = 0; ///< z_j, in units of e_c
    double radius = 0;        ///< A
};

struct Molecule {
    std::vector<Atom> atoms;

    std::size_t n_atoms() const { return atoms.size(); }
    double total_charge() const {
        double q = 0;
        for (const auto& a : atoms) q += a.charge_number;
        return q;
    }
};

inline Molecule single_charge(Vec3 position, double charge_number, double radius = 1.0) {
    return Molecule{{Atom{position, charge_number, radius}}};
}

/// Two atoms at the same position would fold into one singular point with a
/// summed charge; treated as corrupt input instead.
inline void check_distinct_atoms(const Molecule& mol) {
    std::vector<std::size_t> order(mol.atoms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto key = [&](std::size_t i) {
        const Vec3& p = mol.atoms[i].position;
        return std::array<double, 3>{p.x, p.y, p.z};
    };
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (key(order[i - 1]) == key(order[i]))
            throw ParseError("molecule: atoms " + std::to_string(order[i - 1]) + " and " +
                             std::to_string(order[i]) + " share the same position");
}

namespace detail {

inline bool parse_double(std::string_view tok, double& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) toks.push_back(line.substr(i, j - i));
        i = j;
    }
    return toks;
}

}  // namespace detail

/// Read a whitespace-delimited PQR stream. ATOM/HETATM records become atoms
/// in file order; every other record type is skipped. Columns are counted
/// from the end (x y z charge radius) so an optional chain-id column is
/// tolerated.
inline Molecule parse_pqr(std::istream& in) {
    Molecule mol;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks[0] != "ATOM" && toks[0] != "HETATM") continue;
        if (toks.size() < 10)
            throw ParseError("pqr line " + std::to_string(lineno) + ": expected >= 10 fields, got " +
                             std::to_string(toks.size()));
        const std::size_t n = toks.size();
        Atom a;
        double vals[5];
        for (int k = 0; k < 5; ++k) {
            if (!detail::parse_double(toks[n - 5 + k], vals[k]))
                throw ParseError("pqr line " + std::to_string(lineno) + ": non-numeric field '" +
                                 std::string(toks[n - 5 + k]) + "'");
        }
        a.position = {vals[0], vals[1], vals[2]};
        a.charge_number = vals[3];
        a.radius = vals[4];
        if (!a.position.finite())
            throw ParseError("pqr line " + std::to_string(lineno) + ": non-finite coordinate");
        if (a.radius < 0)
            throw ParseError("pqr line " + std::to_string(lineno) + ": negative radius");
        mol.atoms.push_back(a);
    }
    if (mol.atoms.empty()) throw ParseError("pqr: no ATOM/HETATM records found");
    check_distinct_atoms(mol);
    return mol;
}

inline Molecule parse_pqr(const std::string& text) {
    std::istringstream in(text);
    return parse_pqr(in);
}

/// Write atoms back out in PQR layout with full-precision numerics.
inline void serialize_pqr(const Molecule& mol, std::ostream& out) {
    int serial = 1;
    for (const auto& a : mol.atoms) {
        out << "ATOM " << serial++ << " X UNK 1 " << format_g17(a.position.x) << ' '
            << format_g17(a.position.y) << ' ' << format_g17(a.position.z) << ' '
            << format_g17(a.charge_number) << ' ' << format_g17(a.radius) << '\n';
    }
}

}  // namespace nsmpb
