#pragma once

#include <string>
#include <string_view>

#include "tricir/spice/types.hpp"

namespace tricir::spice {

// Parses a SPICE number token: optional sign, mantissa, optional exponent,
// optional scale suffix {t,g,meg,k,m,u,n,p,f} ("meg" before "m"); trailing
// unit letters after the suffix ("10kOhm") are ignored.
// Throws ParseError{BadNumber} on failure.
double parse_value(std::string_view token, int line = 0);

// True if the token parses as a SPICE number.
bool is_value(std::string_view token);

// Parses a full SPICE deck. Case-insensitive; identifiers are canonicalized
// to lower case and net "gnd" to "0". Comments (*, ;), continuations (+),
// .model/.subckt/.ends/.end and opaque analysis cards are handled.
NetlistIR parse_netlist(std::string_view text);

// Canonical re-serialization; parse_netlist(to_spice(ir)) reproduces ir.
std::string to_spice(const NetlistIR& ir);

// Structural equality (devices, nets, models, subckts); directives and title
// are ignored.
bool equivalent(const NetlistIR& a, const NetlistIR& b);

}  // namespace tricir::spice
