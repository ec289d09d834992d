#include "tricir/spice/parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace tricir::spice {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
         c == '$' || c == '-' || c == '+' || c == '#' || c == '!' || c == ':';
}

std::string canon_net(std::string n) {
  if (n == "gnd") return "0";
  return n;
}

// One logical card: continuation lines already joined.
struct Card {
  std::string text;
  int line = 0;
};

std::vector<Card> split_cards(std::string_view text) {
  std::vector<Card> cards;
  std::string cur;
  int cur_line = 0;
  int line_no = 0;
  size_t pos = 0;
  auto flush = [&] {
    if (!cur.empty()) cards.push_back({cur, cur_line});
    cur.clear();
  };
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view raw =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    ++line_no;
    std::string line(raw);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // inline comment
    if (auto sc = line.find(';'); sc != std::string::npos) line.resize(sc);
    size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) {
      // blank: card boundary
    } else if (line[first] == '*') {
      // full-line comment
    } else if (line[first] == '+') {
      if (cur.empty())
        throw ParseError(ParseErrc::LexError, line_no, "continuation with no preceding card");
      cur += ' ';
      cur += line.substr(first + 1);
    } else {
      flush();
      cur = line.substr(first);
      cur_line = line_no;
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  flush();
  return cards;
}

// Tokenized card: lowercased positional tokens plus name=value parameters.
struct TokCard {
  std::vector<std::string> pos;
  std::vector<std::pair<std::string, std::string>> kv;
  int line = 0;
};

TokCard tokenize(const Card& card) {
  std::string s = lower(card.text);
  for (char& c : s) {
    if (c == '(' || c == ')' || c == ',' || c == '\t') c = ' ';
  }
  // split on whitespace keeping '=' as its own token
  std::vector<std::string> toks;
  std::string t;
  auto push = [&] {
    if (!t.empty()) toks.push_back(t);
    t.clear();
  };
  for (char c : s) {
    if (c == ' ') {
      push();
    } else if (c == '=') {
      push();
      toks.push_back("=");
    } else {
      t += c;
    }
  }
  push();

  TokCard out;
  out.line = card.line;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (toks[i] == "=") throw ParseError(ParseErrc::LexError, card.line, "stray '='");
    if (i + 1 < toks.size() && toks[i + 1] == "=") {
      if (i + 2 >= toks.size())
        throw ParseError(ParseErrc::LexError, card.line, "missing value after '='");
      out.kv.emplace_back(toks[i], toks[i + 2]);
      i += 2;
    } else {
      out.pos.push_back(toks[i]);
    }
  }
  return out;
}

struct Scope {
  NetlistIR* ir;
  Scope* parent;
  std::set<std::string> device_names;
};

const ModelCard* find_model(const Scope* sc, const std::string& name) {
  for (const Scope* s = sc; s; s = s->parent) {
    auto it = s->ir->models.find(name);
    if (it != s->ir->models.end()) return &it->second;
  }
  return nullptr;
}

const SubcktDef* find_subckt(const Scope* sc, const std::string& name) {
  for (const Scope* s = sc; s; s = s->parent) {
    auto it = s->ir->subckts.find(name);
    if (it != s->ir->subckts.end()) return &it->second;
  }
  return nullptr;
}

void note_net(NetlistIR& ir, const std::string& n) {
  if (!ir.has_net(n)) ir.nets.push_back(n);
}

void add_device(Scope& sc, Device dev, int line) {
  if (sc.device_names.count(dev.name))
    throw ParseError(ParseErrc::DuplicateDeviceName, line, "duplicate device " + dev.name);
  sc.device_names.insert(dev.name);
  for (const auto& [port, net] : dev.terminals) note_net(*sc.ir, net);
  sc.ir->devices.push_back(std::move(dev));
}

void attach_params(Device& dev, const TokCard& tc) {
  for (const auto& [k, v] : tc.kv) dev.params[k] = parse_value(v, tc.line);
}

// Devices whose model token follows the nets: M, Q, D. `nterm` nets required.
Device parse_modeled_device(const TokCard& tc, DeviceKind kind, int nterm) {
  if (static_cast<int>(tc.pos.size()) < 1 + nterm + 1)
    throw ParseError(ParseErrc::TooFewTerminals, tc.line,
                     tc.pos[0] + ": expected " + std::to_string(nterm) + " nets and a model");
  Device dev;
  dev.name = tc.pos[0];
  dev.kind = kind;
  const auto& ports = kind_ports(kind);
  for (int i = 0; i < nterm; ++i)
    dev.terminals.emplace_back(ports[i], canon_net(tc.pos[1 + i]));
  dev.model_ref = tc.pos[1 + nterm];
  return dev;
}

// R/C/L/V/I and E/G/F/H value handling: first positional number after the
// nets becomes the canonical value param. For sources, scanning stops at the
// first unrecognized identifier (pulse/sin/... argument lists); for passives
// an identifier is a model name and the value may still follow it.
void scan_value(Device& dev, const TokCard& tc, size_t from, const char* value_key,
                bool stop_at_ident) {
  bool expect_dc_value = false;
  for (size_t i = from; i < tc.pos.size(); ++i) {
    const std::string& t = tc.pos[i];
    if (t == "dc") {
      expect_dc_value = true;
      continue;
    }
    if (t == "ac") {  // skip "ac <mag> [<phase>]"
      if (i + 1 < tc.pos.size() && is_value(tc.pos[i + 1])) ++i;
      if (i + 1 < tc.pos.size() && is_value(tc.pos[i + 1])) ++i;
      continue;
    }
    if (is_value(t)) {
      dev.params[value_key] = parse_value(t, tc.line);
      return;
    }
    if (expect_dc_value)
      throw ParseError(ParseErrc::BadNumber, tc.line, "dc keyword without a value");
    if (stop_at_ident) return;
    if (!dev.model_ref) dev.model_ref = t;
  }
}

Device parse_device(Scope& sc, const TokCard& tc) {
  const std::string& name = tc.pos[0];
  char prefix = name[0];
  Device dev;
  dev.name = name;
  auto nets = [&](int n, DeviceKind kind) {
    if (static_cast<int>(tc.pos.size()) < 1 + n)
      throw ParseError(ParseErrc::TooFewTerminals, tc.line,
                       name + ": expected " + std::to_string(n) + " terminals");
    dev.kind = kind;
    const auto& ports = kind_ports(kind);
    for (int i = 0; i < n; ++i) dev.terminals.emplace_back(ports[i], canon_net(tc.pos[1 + i]));
  };
  switch (prefix) {
    case 'r':
      nets(2, DeviceKind::Resistor);
      scan_value(dev, tc, 3, "r", false);
      break;
    case 'c':
      nets(2, DeviceKind::Capacitor);
      scan_value(dev, tc, 3, "c", false);
      break;
    case 'l':
      nets(2, DeviceKind::Inductor);
      scan_value(dev, tc, 3, "l", false);
      break;
    case 'v':
      nets(2, DeviceKind::VSource);
      scan_value(dev, tc, 3, "dc", true);
      break;
    case 'i':
      nets(2, DeviceKind::ISource);
      scan_value(dev, tc, 3, "dc", true);
      break;
    case 'm':
      dev = parse_modeled_device(tc, DeviceKind::Nmos, 4);
      break;
    case 'q':
      dev = parse_modeled_device(tc, DeviceKind::Npn, 3);
      break;
    case 'd':
      dev = parse_modeled_device(tc, DeviceKind::Diode, 2);
      break;
    case 'e':
      nets(4, DeviceKind::Vcvs);
      scan_value(dev, tc, 5, "gain", true);
      break;
    case 'g':
      nets(4, DeviceKind::Vccs);
      scan_value(dev, tc, 5, "gain", true);
      break;
    case 'f':
    case 'h': {
      nets(2, prefix == 'f' ? DeviceKind::Cccs : DeviceKind::Ccvs);
      if (tc.pos.size() < 4)
        throw ParseError(ParseErrc::TooFewTerminals, tc.line,
                         name + ": expected 2 terminals and a controlling source");
      dev.ctrl_ref = tc.pos[3];
      scan_value(dev, tc, 4, "gain", true);
      break;
    }
    case 'x': {
      if (tc.pos.size() < 3)
        throw ParseError(ParseErrc::TooFewTerminals, tc.line,
                         name + ": expected at least one net and a subckt name");
      dev.kind = DeviceKind::SubcktInstance;
      dev.model_ref = tc.pos.back();
      for (size_t i = 1; i + 1 < tc.pos.size(); ++i) {
        dev.terminals.emplace_back("t" + std::to_string(i), canon_net(tc.pos[i]));
      }
      break;
    }
    default:
      throw ParseError(ParseErrc::UnknownCardPrefix, tc.line,
                       std::string("unknown card prefix '") + prefix + "'");
  }
  attach_params(dev, tc);
  return dev;
}

void parse_model_card(Scope& sc, const TokCard& tc) {
  if (tc.pos.size() < 3)
    throw ParseError(ParseErrc::LexError, tc.line, ".model: expected name and family");
  ModelCard mc;
  mc.family = tc.pos[2];
  for (const auto& [k, v] : tc.kv) mc.params[k] = parse_value(v, tc.line);
  sc.ir->models[tc.pos[1]] = std::move(mc);
}

// After a scope is fully parsed: resolve MOS/BJT polarity from model cards
// and rebind subckt-instance terminal names to the definition's ports.
void resolve_scope(Scope& sc) {
  for (Device& dev : sc.ir->devices) {
    if ((dev.kind == DeviceKind::Nmos || dev.kind == DeviceKind::Pmos) && dev.model_ref) {
      if (const ModelCard* mc = find_model(&sc, *dev.model_ref)) {
        dev.kind = mc->family == "pmos" ? DeviceKind::Pmos : DeviceKind::Nmos;
      }
    } else if ((dev.kind == DeviceKind::Npn || dev.kind == DeviceKind::Pnp) && dev.model_ref) {
      if (const ModelCard* mc = find_model(&sc, *dev.model_ref)) {
        dev.kind = mc->family == "pnp" ? DeviceKind::Pnp : DeviceKind::Npn;
      }
    } else if (dev.kind == DeviceKind::SubcktInstance && dev.model_ref) {
      if (const SubcktDef* def = find_subckt(&sc, *dev.model_ref)) {
        if (def->terminals.size() != dev.terminals.size())
          throw ParseError(ParseErrc::TooFewTerminals, 0,
                           dev.name + ": instance has " + std::to_string(dev.terminals.size()) +
                               " terminals, subckt " + *dev.model_ref + " declares " +
                               std::to_string(def->terminals.size()));
        for (size_t i = 0; i < def->terminals.size(); ++i)
          dev.terminals[i].first = def->terminals[i];
      }
    }
  }
}

size_t parse_scope(const std::vector<TokCard>& cards, size_t at, Scope& sc, bool top);

// .subckt card at `cards[at]`; returns index one past the matching .ends.
size_t parse_subckt(const std::vector<TokCard>& cards, size_t at, Scope& outer) {
  const TokCard& head = cards[at];
  if (head.pos.size() < 2)
    throw ParseError(ParseErrc::LexError, head.line, ".subckt: missing name");
  SubcktDef def;
  def.body = std::make_unique<NetlistIR>();
  for (size_t i = 2; i < head.pos.size(); ++i)
    def.body->nets.push_back(canon_net(head.pos[i])), def.terminals.push_back(head.pos[i]);
  Scope inner{def.body.get(), &outer, {}};
  size_t next = parse_scope(cards, at + 1, inner, false);
  outer.ir->subckts[head.pos[1]] = std::move(def);
  return next;
}

size_t parse_scope(const std::vector<TokCard>& cards, size_t at, Scope& sc, bool top) {
  size_t i = at;
  for (; i < cards.size(); ++i) {
    const TokCard& tc = cards[i];
    const std::string& head = tc.pos.empty() ? std::string() : tc.pos[0];
    if (head.empty()) continue;
    if (head[0] == '.') {
      if (head == ".end") {
        if (!top)
          throw ParseError(ParseErrc::UnterminatedSubckt, tc.line, ".end inside .subckt");
        resolve_scope(sc);
        return cards.size();
      }
      if (head == ".ends") {
        if (top)
          throw ParseError(ParseErrc::LexError, tc.line, ".ends without .subckt");
        resolve_scope(sc);
        return i + 1;
      }
      if (head == ".subckt") {
        i = parse_subckt(cards, i, sc) - 1;
        continue;
      }
      if (head == ".model") {
        parse_model_card(sc, tc);
        continue;
      }
      // analysis and other directive cards: recorded, ignored downstream
      std::string raw = head;
      for (size_t k = 1; k < tc.pos.size(); ++k) raw += " " + tc.pos[k];
      for (const auto& [k, v] : tc.kv) raw += " " + k + "=" + v;
      sc.ir->directives.push_back(raw);
      continue;
    }
    if (!std::isalpha(static_cast<unsigned char>(head[0])))
      throw ParseError(ParseErrc::LexError, tc.line, "malformed card: " + head);
    for (char c : head)
      if (!is_ident_char(c))
        throw ParseError(ParseErrc::LexError, tc.line, "malformed identifier: " + head);
    add_device(sc, parse_device(sc, tc), tc.line);
  }
  if (!top) throw ParseError(ParseErrc::UnterminatedSubckt, 0, "missing .ends");
  resolve_scope(sc);
  return i;
}

}  // namespace

bool is_value(std::string_view token) {
  if (token.empty()) return false;
  size_t i = 0;
  if (token[i] == '+' || token[i] == '-') ++i;
  size_t digits = 0, dots = 0;
  while (i < token.size() &&
         (std::isdigit(static_cast<unsigned char>(token[i])) || token[i] == '.')) {
    if (token[i] == '.') ++dots;
    else ++digits;
    ++i;
  }
  return digits > 0 && dots <= 1;
}

double parse_value(std::string_view token, int line) {
  std::string t = lower(token);
  size_t i = 0;
  if (i < t.size() && (t[i] == '+' || t[i] == '-')) ++i;
  size_t mant_begin = i;
  size_t digits = 0, dots = 0;
  while (i < t.size() && (std::isdigit(static_cast<unsigned char>(t[i])) || t[i] == '.')) {
    if (t[i] == '.') ++dots;
    else ++digits;
    ++i;
  }
  if (digits == 0 || dots > 1)
    throw ParseError(ParseErrc::BadNumber, line, "bad number: " + std::string(token));
  // exponent
  if (i < t.size() && t[i] == 'e') {
    size_t j = i + 1;
    if (j < t.size() && (t[j] == '+' || t[j] == '-')) ++j;
    size_t ed = 0;
    while (j < t.size() && std::isdigit(static_cast<unsigned char>(t[j]))) ++j, ++ed;
    if (ed > 0) i = j;
  }
  double base = std::strtod(t.substr(0, i).c_str(), nullptr);
  (void)mant_begin;
  std::string_view rest = std::string_view(t).substr(i);
  double scale = 1.0;
  if (!rest.empty()) {
    if (rest.substr(0, 3) == "meg") scale = 1e6, rest.remove_prefix(3);
    else if (rest[0] == 't') scale = 1e12, rest.remove_prefix(1);
    else if (rest[0] == 'g') scale = 1e9, rest.remove_prefix(1);
    else if (rest[0] == 'k') scale = 1e3, rest.remove_prefix(1);
    else if (rest[0] == 'm') scale = 1e-3, rest.remove_prefix(1);
    else if (rest[0] == 'u') scale = 1e-6, rest.remove_prefix(1);
    else if (rest[0] == 'n') scale = 1e-9, rest.remove_prefix(1);
    else if (rest[0] == 'p') scale = 1e-12, rest.remove_prefix(1);
    else if (rest[0] == 'f') scale = 1e-15, rest.remove_prefix(1);
  }
  // trailing unit letters ("ohm", "v", "a", ...) are ignored; anything else is an error
  for (char c : rest)
    if (!std::isalpha(static_cast<unsigned char>(c)))
      throw ParseError(ParseErrc::BadNumber, line, "bad number: " + std::string(token));
  double v = base * scale;
  if (!std::isfinite(v))
    throw ParseError(ParseErrc::BadNumber, line, "non-finite value: " + std::string(token));
  return v;
}

NetlistIR parse_netlist(std::string_view text) {
  NetlistIR ir;
  std::vector<Card> raw = split_cards(text);
  std::vector<TokCard> cards;
  cards.reserve(raw.size());
  for (const Card& c : raw) cards.push_back(tokenize(c));
  // title: first full-line comment, if any
  {
    size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
      size_t eol = text.find('\n', pos);
      std::string line(text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                      : eol - pos));
      ++line_no;
      size_t first = line.find_first_not_of(" \t\r");
      if (first != std::string::npos) {
        if (line[first] == '*') {
          std::string t = line.substr(first + 1);
          size_t b = t.find_first_not_of(" \t");
          ir.title = b == std::string::npos ? "" : t.substr(b, t.find_last_not_of(" \t\r") - b + 1);
        }
        break;
      }
      if (eol == std::string_view::npos) break;
      pos = eol + 1;
    }
  }
  Scope top{&ir, nullptr, {}};
  parse_scope(cards, 0, top, true);
  return ir;
}

namespace {

std::string fmt_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void emit_scope(const NetlistIR& ir, std::ostringstream& os) {
  for (const Device& d : ir.devices) {
    os << d.name;
    for (const auto& [port, net] : d.terminals) os << ' ' << net;
    bool modeled = d.kind == DeviceKind::Nmos || d.kind == DeviceKind::Pmos ||
                   d.kind == DeviceKind::Npn || d.kind == DeviceKind::Pnp ||
                   d.kind == DeviceKind::Diode || d.kind == DeviceKind::SubcktInstance;
    if (d.ctrl_ref) os << ' ' << *d.ctrl_ref;
    if (d.model_ref) os << ' ' << *d.model_ref;
    for (const auto& [k, v] : d.params) {
      if (!modeled && (k == "r" || k == "c" || k == "l" || k == "dc" || k == "gain")) {
        continue;  // re-emitted positionally below
      }
      os << ' ' << k << '=' << fmt_value(v);
    }
    // positional value re-emission keeps value cards idiomatic
    if (!modeled) {
      for (const char* key : {"r", "c", "l", "dc", "gain"}) {
        auto it = d.params.find(key);
        if (it != d.params.end()) os << ' ' << fmt_value(it->second);
      }
    }
    os << '\n';
  }
  for (const auto& [name, mc] : ir.models) {
    os << ".model " << name << ' ' << mc.family;
    for (const auto& [k, v] : mc.params) os << ' ' << k << '=' << fmt_value(v);
    os << '\n';
  }
  for (const auto& [name, def] : ir.subckts) {
    os << ".subckt " << name;
    for (const auto& t : def.terminals) os << ' ' << t;
    os << '\n';
    emit_scope(*def.body, os);
    os << ".ends " << name << '\n';
  }
}

}  // namespace

std::string to_spice(const NetlistIR& ir) {
  std::ostringstream os;
  if (!ir.title.empty()) os << "* " << ir.title << '\n';
  emit_scope(ir, os);
  for (const auto& d : ir.directives) os << d << '\n';
  os << ".end\n";
  return os.str();
}

bool equivalent(const NetlistIR& a, const NetlistIR& b) {
  if (a.devices.size() != b.devices.size()) return false;
  for (size_t i = 0; i < a.devices.size(); ++i) {
    const Device& x = a.devices[i];
    const Device& y = b.devices[i];
    if (x.name != y.name || x.kind != y.kind || x.terminals != y.terminals ||
        x.params != y.params || x.model_ref != y.model_ref || x.ctrl_ref != y.ctrl_ref)
      return false;
  }
  auto sorted = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  if (sorted(a.nets) != sorted(b.nets)) return false;
  if (a.models.size() != b.models.size()) return false;
  for (const auto& [name, mc] : a.models) {
    auto it = b.models.find(name);
    if (it == b.models.end() || it->second.family != mc.family || it->second.params != mc.params)
      return false;
  }
  if (a.subckts.size() != b.subckts.size()) return false;
  for (const auto& [name, def] : a.subckts) {
    auto it = b.subckts.find(name);
    if (it == b.subckts.end() || it->second.terminals != def.terminals) return false;
    if (!equivalent(*def.body, *it->second.body)) return false;
  }
  return true;
}

}  // namespace tricir::spice
