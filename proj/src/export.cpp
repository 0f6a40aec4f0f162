#include "dcflex/export.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dcflex {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  return out;
}

// plant-side load input at a sample
Eigen::VectorXd plant_u_l(const ClosedLoopSystem& sys, const GridState& gs,
                          const ControllerState& cs) {
  GridInput input;
  ControllerPorts ports;
  interconnect(gs, cs, sys.params(), sys.constraints(), input, ports);
  return input.u_l;
}

struct Series {
  std::string label;
  std::vector<double> y;
};

const char* kPalette[10] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                            "#bcbd22", "#17becf"};

void nice_ticks(double lo, double hi, std::vector<double>& ticks) {
  double range = hi - lo;
  if (!(range > 0.0)) range = std::max(1e-12, std::abs(hi) * 1e-6 + 1e-12);
  double raw = range / 4.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double norm = raw / mag;
  double step = (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
  double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + 0.5 * step; v += step) ticks.push_back(v);
}

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& y_label, const std::vector<double>& t,
                     const std::vector<Series>& series) {
  const double W = 960, H = 560;
  const double L = 80, R = 150, T = 48, B = 56;
  const double plot_w = W - L - R, plot_h = H - T - B;

  // log-time axis; the t = 0 sample is drawn at the first positive decade
  double t_pos = 0.0;
  for (double v : t)
    if (v > 0.0) {
      t_pos = v;
      break;
    }
  if (t_pos == 0.0) t_pos = 1.0;
  double x_lo = std::floor(std::log10(t_pos));
  double x_hi = std::ceil(std::log10(std::max(t.back(), t_pos * 10.0)));
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;

  double y_lo = 1e300, y_hi = -1e300;
  for (const auto& s : series)
    for (double v : s.y) {
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  if (y_lo > y_hi) {
    y_lo = 0.0;
    y_hi = 1.0;
  }
  double pad = (y_hi - y_lo) * 0.06;
  if (pad <= 0.0) pad = std::max(1e-9, std::abs(y_hi) * 1e-6 + 1e-9);
  y_lo -= pad;
  y_hi += pad;

  auto X = [&](double tv) {
    double lx = std::log10(std::max(tv, t_pos));
    return L + (lx - x_lo) / (x_hi - x_lo) * plot_w;
  };
  auto Y = [&](double yv) {
    return T + (y_hi - yv) / (y_hi - y_lo) * plot_h;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
      << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << L << "\" y=\"28\" font-family=\"sans-serif\" "
         "font-size=\"18\" fill=\"#222\">"
      << title << "</text>\n";

  // frame
  svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n";

  // decade grid and x labels
  for (double d = x_lo; d <= x_hi + 0.5; d += 1.0) {
    double x = L + (d - x_lo) / (x_hi - x_lo) * plot_w;
    svg << "<line x1=\"" << x << "\" y1=\"" << T << "\" x2=\"" << x
        << "\" y2=\"" << T + plot_h
        << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << T + plot_h + 20
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#444\" "
           "text-anchor=\"middle\">1e"
        << static_cast<long>(d) << "</text>\n";
  }
  svg << "<text x=\"" << L + plot_w / 2 << "\" y=\"" << H - 14
      << "\" font-family=\"sans-serif\" font-size=\"14\" fill=\"#222\" "
         "text-anchor=\"middle\">t [s] (log scale)</text>\n";

  // y ticks
  std::vector<double> ticks;
  nice_ticks(y_lo, y_hi, ticks);
  for (double v : ticks) {
    double y = Y(v);
    svg << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << L + plot_w
        << "\" y2=\"" << y << "\" stroke=\"#eee\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << L - 8 << "\" y=\"" << y + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#444\" "
           "text-anchor=\"end\">"
        << g6(v) << "</text>\n";
  }
  svg << "<text x=\"20\" y=\"" << T + plot_h / 2
      << "\" font-family=\"sans-serif\" font-size=\"14\" fill=\"#222\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << T + plot_h / 2 << ")\">" << y_label << "</text>\n";

  // series, decimated to a plottable point count
  std::size_t npts = t.size();
  std::size_t step = npts > 2000 ? npts / 2000 + 1 : 1;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    svg << "<polyline fill=\"none\" stroke=\"" << kPalette[si % 10]
        << "\" stroke-width=\"1.4\" points=\"";
    for (std::size_t i = 0; i < npts; i += step) {
      svg << g6(X(t[i])) << "," << g6(Y(s.y[i])) << " ";
    }
    if ((npts - 1) % step != 0)
      svg << g6(X(t.back())) << "," << g6(Y(s.y.back()));
    svg << "\"/>\n";
    double ly = T + 16 + 18.0 * static_cast<double>(si);
    svg << "<line x1=\"" << L + plot_w + 12 << "\" y1=\"" << ly - 4
        << "\" x2=\"" << L + plot_w + 34 << "\" y2=\"" << ly - 4
        << "\" stroke=\"" << kPalette[si % 10] << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << L + plot_w + 40 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">"
        << s.label << "</text>\n";
  }
  svg << "</svg>\n";

  auto out = open_out(path);
  out << svg.str();
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace

std::string trace_csv_header(int n, int m) {
  std::ostringstream os;
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",V_" << i;
  for (int i = 1; i <= n; ++i) os << ",Is_" << i;
  for (int i = 1; i <= n; ++i) os << ",ul_" << i;
  for (int k = 1; k <= m; ++k) os << ",I_" << k;
  os << ",S,S_c,S_cl,kkt_residual";
  return os.str();
}

void write_trace_csv(const std::string& path, const ClosedLoopSystem& sys,
                     const SimTrace& trace) {
  if (trace.t.empty())
    throw std::runtime_error("trace export: empty trace, nothing to write");
  const int n = sys.layout().n, m = sys.layout().m;

  std::string body;
  body.reserve(trace.t.size() * static_cast<std::size_t>(26 * (3 * n + m + 5)));
  body += trace_csv_header(n, m);
  body += '\n';
  for (std::size_t s = 0; s < trace.t.size(); ++s) {
    const GridState& gs = trace.plant[s];
    const Eigen::VectorXd ul = plant_u_l(sys, gs, trace.ctrl[s]);
    body += g17(trace.t[s]);
    for (int i = 0; i < n; ++i) {
      body += ',';
      body += g17(gs.V[i]);
    }
    for (int i = 0; i < n; ++i) {
      body += ',';
      body += g17(gs.I_s[i]);
    }
    for (int i = 0; i < n; ++i) {
      body += ',';
      body += g17(ul[i]);
    }
    for (int k = 0; k < m; ++k) {
      body += ',';
      body += g17(gs.I[k]);
    }
    body += ',';
    body += g17(trace.S[s]);
    body += ',';
    body += g17(trace.S_c[s]);
    body += ',';
    body += g17(trace.S_cl[s]);
    body += ',';
    body += g17(trace.kkt[s]);
    body += '\n';
  }

  auto out = open_out(path);
  out << body;
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_certificate(const std::string& path, const std::string& name,
                       const ScenarioResult& result) {
  const RunCertificate& c = result.certificate;
  const SimTrace& tr = result.trace;
  std::ostringstream os;
  os << "run: " << name << "\n";
  os << "nodes: " << result.params.n() << "\n";
  os << "lines: " << result.params.m() << "\n";
  os << "curtailment ceiling: " << g6(result.lambda_flex) << "\n";
  os << "flexible weight sum: " << g6(result.params.pi_u.sum()) << "\n";
  os << "converged: " << (c.converged ? "yes" : "no") << "\n";
  os << "diverged: " << (c.diverged ? "yes" : "no") << "\n";
  if (c.converged)
    os << "convergence time: " << g6(c.convergence_time) << " s\n";
  os << "steps: " << tr.steps << "\n";
  os << "fallback steps: " << tr.fallback_steps << "\n";
  os << "final rate max-norm: " << g6(c.final_rate_norm) << "\n";
  os << "kkt residual: " << g6(c.kkt_residual) << "\n";
  os << "plant rate max-norm: " << g6(c.plant_rate_norm) << "\n";
  os << "circuit equation residual (relative): " << g6(c.plant_eq_residual)
     << "\n";
  os << "loss identity gap (relative): " << g6(c.loss_identity_gap) << "\n";
  os << "voltage band: " << (c.band_compliant ? "respected" : "violated")
     << "\n";
  os << "average voltage (pi_c-weighted): " << g6(c.average_voltage) << " V\n";
  os << "consumption reduction: " << g6(c.reduction_amps) << " A ("
     << g6(c.reduction_pct) << " %)\n";
  os << "storage function violations: " << c.lyapunov_violations << "\n";
  if (tr.supply_integral != 0.0)
    os << "integrated supply: " << g17(tr.supply_integral) << "\n";
  os << "events: " << tr.events.size() << "\n";
  for (const auto& ev : tr.events)
    os << "  t=" << g6(ev.t) << "  " << ev.what << "\n";

  auto out = open_out(path);
  out << os.str();
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_plots(const std::string& dir, const ClosedLoopSystem& sys,
                 const SimTrace& trace) {
  if (trace.t.empty())
    throw std::runtime_error("plot export: empty trace, nothing to plot");
  const int n = sys.layout().n, m = sys.layout().m;
  const std::size_t ns = trace.t.size();

  std::vector<Series> volt(static_cast<std::size_t>(n));
  std::vector<Series> curr(static_cast<std::size_t>(n));
  std::vector<Series> load(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    volt[i].label = "V_" + std::to_string(i + 1);
    curr[i].label = "Is_" + std::to_string(i + 1);
    load[i].label = "ul_" + std::to_string(i + 1);
    volt[i].y.resize(ns);
    curr[i].y.resize(ns);
    load[i].y.resize(ns);
  }
  for (std::size_t s = 0; s < ns; ++s) {
    const Eigen::VectorXd ul = plant_u_l(sys, trace.plant[s], trace.ctrl[s]);
    for (int i = 0; i < n; ++i) {
      volt[i].y[s] = trace.plant[s].V[i];
      curr[i].y[s] = trace.plant[s].I_s[i];
      load[i].y[s] = ul[i];
    }
  }
  (void)m;
  write_svg_chart(dir + "/voltage.svg", "Node voltages", "V [V]", trace.t,
                  volt);
  write_svg_chart(dir + "/current.svg", "Source currents", "I_s [A]", trace.t,
                  curr);
  write_svg_chart(dir + "/ul.svg", "Load inputs", "u_l", trace.t, load);
}

}  // namespace dcflex
