#include "dcflex/presets.hpp"

#include <stdexcept>
#include <string>

namespace dcflex {

namespace {

const char* kCommon = R"(# ten prosumers on a ring, one dispatchable source and one load each
[grid]
nodes = 10
topology = ring
seed = 1

[ranges]
R_s = 1 mohm .. 2 mohm
L_s = 1.8 mH .. 3 mH
C = 1.7 mF .. 2.5 mF
I_l = 6 A .. 14 A
R_line = 50 mohm .. 100 mohm
L_line = 2 uH .. 3 uH

[node]
V_d = 380 V
V_min = 379.3 V
V_max = 380.7 V
pi_c = 0.1

[weights]
alpha = 1e6
beta = 1e-6
gamma = 1

[constraints]
clamp_u_l = true
voltage_band = true
tau_eta = 1

[integration]
method = modal

)";

const char* kFlex1 = R"([flexibility]
source = ceiling
psi = 0.5
spread = 0.25
)";

const char* kFlex2 = R"([flexibility]
source = profile
psi = 0.5
stv = 0
sev = 0
spread = 0.25
)";

const char* kFlex3 = R"([flexibility]
source = profile
psi = 0.5
stv = 2
sev = -1
spread = 0.25
)";

const char* kFlex4 = R"([flexibility]
source = profile
psi = 0.5
stv = -1
sev = 2
spread = 0.25
)";

std::string build(int which) {
  const char* flex = which == 1   ? kFlex1
                     : which == 2 ? kFlex2
                     : which == 3 ? kFlex3
                                  : kFlex4;
  return std::string(kCommon) + flex;
}

}  // namespace

const char* preset_text(int which) {
  static const std::string t1 = build(1);
  static const std::string t2 = build(2);
  static const std::string t3 = build(3);
  static const std::string t4 = build(4);
  switch (which) {
    case 1: return t1.c_str();
    case 2: return t2.c_str();
    case 3: return t3.c_str();
    case 4: return t4.c_str();
    default: throw std::out_of_range("preset: expected 1, 2, 3, or 4");
  }
}

ScenarioConfig preset_scenario(int which) {
  std::string name = "scenario" + std::to_string(which);
  return load_config_text(preset_text(which), name);
}

}  // namespace dcflex
