#include "tricir/corpus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "tricir/core/common.hpp"

namespace tricir::corpus {

namespace {

namespace fs = std::filesystem;

struct Slot {
  std::string name;
  std::vector<std::string> choices;
};

using Tokens = std::vector<std::string>;

struct FamilyDef {
  std::string name;
  int label;
  std::vector<Slot> slots;
  std::string (*netlist)(const Tokens&);
  std::string (*caption)(const Tokens&);
};

std::string divider_netlist(const Tokens& v) {
  return "* resistive divider\n"
         "VIN in 0 DC " + v[0] + "\n"
         "R1 in out " + v[1] + "\n"
         "R2 out 0 " + v[2] + "\n"
         ".op\n.end\n";
}
std::string divider_caption(const Tokens& v) {
  return "A resistive voltage divider fed from a " + v[0] + " volt source with a " + v[1] +
         " series resistor and a " + v[2] + " shunt resistor to ground.";
}

std::string rc_netlist(const Tokens& v) {
  return "* rc low-pass filter\n"
         "VIN in 0 DC " + v[2] + " AC 1\n"
         "R1 in out " + v[0] + "\n"
         "C1 out 0 " + v[1] + "\n"
         ".op\n.end\n";
}
std::string rc_caption(const Tokens& v) {
  return "A first-order RC low-pass filter with a " + v[0] + " series resistor and a " +
         v[1] + " capacitor to ground, driven from a " + v[2] + " volt source.";
}

std::string cs_netlist(const Tokens& v) {
  return "* common-source amplifier\n"
         "M1 out in 0 0 NMOS W=" + v[0] + " L=" + v[1] + "\n"
         "RD vdd out " + v[2] + "\n"
         "VDD vdd 0 DC 3.3\n"
         "VIN in 0 DC " + v[3] + "\n"
         ".model NMOS NMOS (VTO=0.7 KP=120u LAMBDA=0.01)\n"
         ".op\n.end\n";
}
std::string cs_caption(const Tokens& v) {
  return "A common-source NMOS amplifier with device width " + v[0] + " and length " +
         v[1] + ", a " + v[2] + " drain resistor, biased at " + v[3] +
         " volt on the gate.";
}

std::string diff_netlist(const Tokens& v) {
  return "* differential pair\n"
         "M1 outp inp tail 0 NMOS W=" + v[0] + " L=1u\n"
         "M2 outn inn tail 0 NMOS W=" + v[0] + " L=1u\n"
         "RL1 vdd outp " + v[1] + "\n"
         "RL2 vdd outn " + v[1] + "\n"
         "IT tail 0 DC " + v[2] + "\n"
         "VDD vdd 0 DC 3.3\n"
         "VP inp 0 DC 1.2\n"
         "VN inn 0 DC 1.2\n"
         ".model NMOS NMOS (VTO=0.7 KP=120u)\n"
         ".op\n.end\n";
}
std::string diff_caption(const Tokens& v) {
  return "An NMOS differential pair with " + v[1] + " load resistors, a tail current of " +
         v[2] + ", and input devices " + v[0] + " wide.";
}

std::string mirror_netlist(const Tokens& v) {
  return "* nmos current mirror\n"
         "IREF vdd ref DC " + v[0] + "\n"
         "M1 ref ref 0 0 NMOS W=" + v[1] + " L=" + v[3] + "\n"
         "M2 out ref 0 0 NMOS W=" + v[2] + " L=" + v[3] + "\n"
         "VDD vdd 0 DC 3.3\n"
         "VOUT out 0 DC 1.5\n"
         ".model NMOS NMOS (VTO=0.7 KP=120u)\n"
         ".op\n.end\n";
}
std::string mirror_caption(const Tokens& v) {
  return "An NMOS current mirror copying a " + v[0] + " reference through a diode-connected " +
         v[1] + " input device into a " + v[2] + " output device of length " + v[3] + ".";
}

std::string miller_netlist(const Tokens& v) {
  return "* two-stage miller op-amp\n"
         "IB vdd bias DC " + v[2] + "\n"
         "MB bias bias 0 0 NMOS W=10u L=1u\n"
         "M5 tail bias 0 0 NMOS W=20u L=1u\n"
         "M1 n1 inp tail 0 NMOS W=20u L=1u\n"
         "M2 n2 inn tail 0 NMOS W=20u L=1u\n"
         "M3 n1 n1 vdd vdd PMOS W=10u L=1u\n"
         "M4 n2 n1 vdd vdd PMOS W=10u L=1u\n"
         "M6 out n2 vdd vdd PMOS W=" + v[1] + " L=1u\n"
         "M7 out bias 0 0 NMOS W=20u L=1u\n"
         "CC n2 out " + v[0] + "\n"
         "VDD vdd 0 DC " + v[3] + "\n"
         "VP inp 0 DC 1.5\n"
         "VN inn 0 DC 1.5\n"
         ".model NMOS NMOS (VTO=0.7 KP=120u)\n"
         ".model PMOS PMOS (VTO=-0.7 KP=40u)\n"
         ".op\n.end\n";
}
std::string miller_caption(const Tokens& v) {
  return "A two-stage Miller-compensated op-amp with a " + v[0] +
         " compensation capacitor, a " + v[1] + " wide output PMOS, and a " + v[2] +
         " bias current from a " + v[3] + " volt supply.";
}

std::string wien_netlist(const Tokens& v) {
  return "* wien-bridge rc network\n"
         "E1 out 0 vp 0 " + v[2] + "\n"
         "R1 out n1 " + v[0] + "\n"
         "C1 n1 vp " + v[1] + "\n"
         "R2 vp 0 " + v[0] + "\n"
         "C2 vp 0 " + v[1] + "\n"
         "RL out 0 10k\n"
         ".op\n.end\n";
}
std::string wien_caption(const Tokens& v) {
  return "A Wien-bridge RC network around a gain-of-" + v[2] + " amplifier stage with " +
         v[0] + " resistors and " + v[1] + " capacitors setting the resonance.";
}

std::string ring_netlist(const Tokens& v) {
  int stages = v[0] == "3" ? 3 : 5;
  std::string out = "* cmos ring oscillator\n";
  for (int i = 0; i < stages; ++i) {
    std::string in = "s" + std::to_string(i);
    std::string next = "s" + std::to_string((i + 1) % stages);
    out += "MP" + std::to_string(i) + " " + next + " " + in + " vdd vdd PMOS W=" + v[1] +
           " L=1u\n";
    out += "MN" + std::to_string(i) + " " + next + " " + in + " 0 0 NMOS W=10u L=1u\n";
    out += "CL" + std::to_string(i) + " " + next + " 0 " + v[2] + "\n";
  }
  out += "VDD vdd 0 DC " + v[3] + "\n";
  out += ".model NMOS NMOS (VTO=0.7 KP=120u)\n";
  out += ".model PMOS PMOS (VTO=-0.7 KP=40u)\n";
  out += ".op\n.end\n";
  return out;
}
std::string ring_caption(const Tokens& v) {
  return "A " + v[0] + "-stage CMOS ring oscillator with " + v[1] +
         " wide PMOS devices and " + v[2] + " load capacitors, running from a " + v[3] +
         " volt supply.";
}

const std::vector<FamilyDef>& families_table() {
  static const std::vector<FamilyDef> defs = {
      {"common_source_amp", 0,
       {{"w", {"5u", "10u", "20u", "50u"}},
        {"l", {"0.5u", "1u", "2u"}},
        {"rd", {"1k", "2.2k", "4.7k", "10k"}},
        {"vb", {"0.9", "1.0", "1.1", "1.2"}}},
       cs_netlist, cs_caption},
      {"diff_pair", 3,
       {{"w", {"5u", "10u", "20u", "50u"}},
        {"rl", {"2.2k", "4.7k", "10k", "22k"}},
        {"it", {"100u", "200u", "500u", "1m"}}},
       diff_netlist, diff_caption},
      {"current_mirror", 4,
       {{"iref", {"10u", "20u", "50u", "100u"}},
        {"w", {"5u", "10u", "20u"}},
        {"wout", {"10u", "20u", "40u"}},
        {"l", {"0.5u", "1u"}}},
       mirror_netlist, mirror_caption},
      {"miller_opamp", 6,
       {{"cc", {"1p", "2.2p", "4.7p", "10p"}},
        {"w6", {"20u", "40u", "80u"}},
        {"ib", {"10u", "20u", "50u"}},
        {"vdd", {"3", "3.3"}}},
       miller_netlist, miller_caption},
      {"rc_lowpass", 14,
       {{"r", {"1k", "2.2k", "4.7k", "10k", "22k", "47k"}},
        {"c", {"100p", "220p", "470p", "1n", "2.2n", "4.7n"}},
        {"v", {"1", "1.8", "2.5", "3.3"}}},
       rc_netlist, rc_caption},
      {"wien_bridge", 16,
       {{"r", {"1k", "2.2k", "4.7k", "10k"}},
        {"c", {"10n", "22n", "47n", "100n"}},
        {"gain", {"3", "3.3", "4", "5"}}},
       wien_netlist, wien_caption},
      {"ring_oscillator", 11,
       {{"stages", {"3", "5"}},
        {"wp", {"10u", "20u", "40u"}},
        {"cl", {"10f", "20f", "50f", "100f"}},
        {"vdd", {"1.8", "2.5", "3.3"}}},
       ring_netlist, ring_caption},
      {"resistive_divider", 17,
       {{"v", {"1", "1.8", "2.5", "3.3", "5", "9"}},
        {"r1", {"1k", "2.2k", "4.7k", "10k", "22k", "47k"}},
        {"r2", {"1k", "2.2k", "4.7k", "10k", "22k", "47k"}}},
       divider_netlist, divider_caption},
  };
  return defs;
}

std::vector<double> unit_vector(std::uint64_t state, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm2 = 0.0;
  for (double& x : v) {
    x = unit_normal(state);
    norm2 += x * x;
  }
  double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace

std::vector<std::string> synthetic_family_names() {
  std::vector<std::string> names;
  for (const auto& f : families_table()) names.push_back(f.name);
  return names;
}

Manifest generate_synthetic_corpus(const std::string& out_dir,
                                   const SynthesisOptions& opt) {
  std::vector<const FamilyDef*> selected;
  if (opt.families.empty()) {
    for (const auto& f : families_table()) selected.push_back(&f);
  } else {
    for (const std::string& name : opt.families) {
      const FamilyDef* found = nullptr;
      for (const auto& f : families_table())
        if (f.name == name) found = &f;
      if (!found) throw UnknownFamily("no synthetic family named " + name);
      selected.push_back(found);
    }
  }

  fs::create_directories(fs::path(out_dir) / "netlists");
  fs::create_directories(fs::path(out_dir) / "features");

  Manifest m;
  m.feature_dim = opt.feature_dim;

  for (const FamilyDef* fam : selected) {
    std::uint64_t state = opt.seed ^ fnv1a("draw:" + fam->name);
    // family anchor direction in image-feature space
    std::vector<double> anchor =
        unit_vector(opt.seed ^ fnv1a("anchor:" + fam->name), opt.feature_dim);

    std::set<std::string> seen_tuples;
    int train_count = static_cast<int>(std::floor(opt.train_frac * opt.per_family + 0.5));
    for (int i = 0; i < opt.per_family; ++i) {
      // draw a value tuple unseen within this family
      std::vector<int> choice;
      std::string key;
      for (int attempt = 0; attempt < 10000; ++attempt) {
        choice.clear();
        key.clear();
        for (const Slot& s : fam->slots) {
          int q = static_cast<int>(splitmix64(state) %
                                   static_cast<std::uint64_t>(s.choices.size()));
          choice.push_back(q);
          key += std::to_string(q) + ",";
        }
        if (seen_tuples.insert(key).second) break;
      }
      Tokens toks;
      for (std::size_t s = 0; s < fam->slots.size(); ++s)
        toks.push_back(fam->slots[s].choices[static_cast<std::size_t>(choice[s])]);

      char idbuf[96];
      std::snprintf(idbuf, sizeof(idbuf), "%s_%04d", fam->name.c_str(), i);
      std::string id = idbuf;

      std::string netlist_rel = "netlists/" + id + ".sp";
      std::string feature_rel = "features/" + id + ".f32";
      {
        std::ofstream os(fs::path(out_dir) / netlist_rel);
        os << fam->netlist(toks);
      }

      // image feature: anchor + sigma * (normalized sum of per-(slot,choice)
      // directions); value-keyed so the image channel carries instance signal
      std::vector<double> dir(static_cast<std::size_t>(opt.feature_dim), 0.0);
      for (std::size_t s = 0; s < fam->slots.size(); ++s) {
        std::uint64_t ps = opt.seed ^ fnv1a("pert:" + fam->name + ":" + fam->slots[s].name +
                                            "=" + toks[s]);
        std::vector<double> v = unit_vector(ps, opt.feature_dim);
        for (int d = 0; d < opt.feature_dim; ++d)
          dir[static_cast<std::size_t>(d)] += v[static_cast<std::size_t>(d)];
      }
      double dn = 0.0;
      for (double x : dir) dn += x * x;
      dn = std::sqrt(dn);
      std::vector<float> feat(static_cast<std::size_t>(opt.feature_dim));
      double fn = 0.0;
      for (int d = 0; d < opt.feature_dim; ++d) {
        double x = anchor[static_cast<std::size_t>(d)] +
                   (dn > 0 ? opt.image_sigma * dir[static_cast<std::size_t>(d)] / dn : 0.0);
        feat[static_cast<std::size_t>(d)] = static_cast<float>(x);
        fn += x * x;
      }
      fn = std::sqrt(fn);
      for (float& x : feat) x = static_cast<float>(x / fn);
      write_f32_vector((fs::path(out_dir) / feature_rel).string(), feat);

      TripletRecord rec;
      rec.id = id;
      rec.netlist_path = netlist_rel;
      rec.caption = fam->caption(toks);
      rec.image_feature_path = feature_rel;
      rec.type_label = fam->label;
      rec.split = i < train_count ? "train" : "test";
      m.records.push_back(std::move(rec));
    }
  }

  save_manifest(m, (fs::path(out_dir) / "manifest.jsonl").string());
  return m;
}

}  // namespace tricir::corpus
