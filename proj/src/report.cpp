#include "mpseg/report.hpp"

#include <cstdio>
#include <sstream>

namespace mpseg {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

namespace {
std::string pct(double v) { return fixed6(100.0 * v); }

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.1f", v);
  return buf;
}
}  // namespace

std::string render_report(const MetricsReport& r) {
  std::ostringstream os;
  const auto& e = r.eval;
  os << "mpseg-metrics version=1\n";
  os << "command: " << r.command << '\n';
  os << "variant: " << r.variant << '\n';
  os << "seed: " << r.seed << '\n';
  os << "config_hash: " << r.config_hash << '\n';
  os << "dataset_hash: " << r.dataset_hash << '\n';
  os << "split: " << r.split << '\n';
  os << "scenes: " << e.scenes << '\n';
  os << "layers: " << e.miou_l.size() << '\n';
  os << "ap50: " << pct(e.ap.ap50) << '\n';
  os << "ap75: " << pct(e.ap.ap75) << '\n';
  os << "ap_mean: " << pct(e.ap.mean()) << '\n';
  os << "util_final_min: " << pct(e.final_util_min) << '\n';
  for (std::size_t i = 0; i < e.miou_l.size(); ++i)
    os << "miou_l." << (i + 1) << ": " << pct(e.miou_l[i]) << '\n';
  for (std::size_t i = 0; i < e.util.size(); ++i) os << "util." << i << ": " << pct(e.util[i]) << '\n';
  for (std::size_t i = 0; i < r.epoch_loss.size(); ++i)
    os << "epoch_loss." << (i + 1) << ": " << fixed6(r.epoch_loss[i]) << '\n';
  return os.str();
}

std::string render_layer_csv(const EvalResult& e) {
  std::ostringstream os;
  os << "layer,miou_l,util\n";
  for (std::size_t i = 0; i < e.util.size(); ++i) {
    os << i << ',';
    if (i > 0) os << pct(e.miou_l[i - 1]);
    os << ',' << pct(e.util[i]) << '\n';
  }
  return os.str();
}

std::string render_analysis_table(const AnalysisResult& a) {
  std::ostringstream os;
  const std::size_t L = a.matching.miou_l.size();
  auto row = [&](const char* label, const std::vector<double>& v, std::size_t offset) {
    os << label;
    for (std::size_t i = 1; i <= L; ++i) os << fixed1(100.0 * v[i - offset]);
    os << '\n';
  };
  os << "layer                  ";
  for (std::size_t i = 1; i <= L; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%6zu", i);
    os << buf;
  }
  os << '\n';
  row("matching mIoU-L(%)     ", a.matching.miou_l, 1);
  row("matching Util(%)       ", a.matching.util, 0);
  row("MP mIoU-L(%)           ", a.mp_miou_l, 1);
  row("MP Util*(%) bipartite  ", a.mp_util_bipartite, 0);
  row("MP Util(%) hard        ", a.mp_util_hard, 0);
  return os.str();
}

std::string render_analysis_csv(const AnalysisResult& a) {
  std::ostringstream os;
  os << "layer,match_miou_l,match_util,mp_miou_l,mp_util_bipartite,mp_util_hard\n";
  for (std::size_t i = 0; i < a.matching.util.size(); ++i) {
    os << i << ',';
    if (i > 0) os << pct(a.matching.miou_l[i - 1]);
    os << ',' << pct(a.matching.util[i]) << ',';
    if (i > 0) os << pct(a.mp_miou_l[i - 1]);
    os << ',' << pct(a.mp_util_bipartite[i]) << ',' << pct(a.mp_util_hard[i]) << '\n';
  }
  return os.str();
}

std::string refinement_csv_header() {
  return "index,sigma,T0,T1,t0,t1,sum_alpha,sum_beta,weight_ratio,ratio_bound,condition,"
         "interval_lo,interval_hi,separable,status\n";
}

std::string refinement_csv_row(std::size_t index, double sigma, const RefinementBounds& b) {
  std::ostringstream os;
  os << index << ',' << fixed6(sigma) << ',' << fixed6(b.T0) << ',' << fixed6(b.T1) << ','
     << fixed6(b.t0) << ',' << fixed6(b.t1) << ',' << fixed6(b.sum_alpha) << ','
     << fixed6(b.sum_beta) << ',' << fixed6(b.weight_ratio) << ',' << fixed6(b.ratio_bound) << ','
     << (b.condition ? 1 : 0) << ',';
  if (b.interval)
    os << fixed6(b.interval->first) << ',' << fixed6(b.interval->second);
  else
    os << ',';
  os << ',' << (b.separable ? 1 : 0) << ',' << b.status << '\n';
  return os.str();
}

}  // namespace mpseg
