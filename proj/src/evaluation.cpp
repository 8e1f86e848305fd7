#include "airtrack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

namespace airtrack::eval {

std::string_view to_string(IdMode mode) { return mode == IdMode::kOUID ? "oUID" : "aUID"; }

IdMapping map_ids(std::span<const TrackRecord> gt, std::span<const TrackRecord> pred, double iou_min,
                  IdMode mode) {
  if (!(iou_min > 0.0 && iou_min <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "iou_min must be in (0, 1]");
  }
  std::set<std::int64_t> frames;
  for (const auto& t : gt) for (const auto& [f, b] : t.boxes) frames.insert(f);

  std::map<std::int64_t, std::int64_t> owner;  // pred id -> gt id
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> first_match;  // (gt, pred) -> frame
  for (std::int64_t f : frames) {
    struct Pair {
      double iou;
      std::int64_t g;
      std::int64_t p;
    };
    std::vector<Pair> pairs;
    for (const auto& g : gt) {
      const auto gb = g.boxes.find(f);
      if (gb == g.boxes.end()) continue;
      for (const auto& p : pred) {
        const auto pb = p.boxes.find(f);
        if (pb == p.boxes.end()) continue;
        const double v = iou(gb->second, pb->second);
        if (v >= iou_min) pairs.push_back({v, g.id, p.id});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      return std::tie(a.g, a.p) < std::tie(b.g, b.p);
    });
    std::set<std::int64_t> used_g, used_p;
    for (const Pair& pr : pairs) {
      if (used_g.count(pr.g) || used_p.count(pr.p)) continue;
      used_g.insert(pr.g);
      used_p.insert(pr.p);
      owner.emplace(pr.p, pr.g);
      first_match.emplace(std::make_pair(pr.g, pr.p), f);
    }
  }

  IdMapping out;
  out.mode = mode;
  for (const auto& g : gt) out.assignment[g.id];
  for (const auto& [pid, gid] : owner) {
    out.assignment[gid].push_back({pid, first_match.at({gid, pid})});
  }
  for (auto& [gid, credited] : out.assignment) {
    std::sort(credited.begin(), credited.end(), [](const CreditedId& a, const CreditedId& b) {
      return std::tie(a.from_frame, a.pred_id) < std::tie(b.from_frame, b.pred_id);
    });
    if (mode == IdMode::kOUID && credited.size() > 1) credited.resize(1);
  }
  return out;
}

namespace {

const TrackRecord* find_pred(std::span<const TrackRecord> pred, std::int64_t id) {
  for (const auto& p : pred) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

// Best IoU among credited predictions at a frame, or -1 when none is present.
double credited_overlap(const BoundingBox* gt_box, std::int64_t frame,
                        const std::vector<CreditedId>& credited, std::span<const TrackRecord> pred) {
  double best = -1.0;
  for (const CreditedId& c : credited) {
    if (c.from_frame > frame) continue;
    const TrackRecord* p = find_pred(pred, c.pred_id);
    if (p == nullptr) continue;
    const auto it = p->boxes.find(frame);
    if (it == p->boxes.end()) continue;
    best = std::max(best, gt_box ? iou(*gt_box, it->second) : 0.0);
  }
  return best;
}

const std::vector<CreditedId>& credited_for(const IdMapping& mapping, std::int64_t gt_id) {
  static const std::vector<CreditedId> none;
  const auto it = mapping.assignment.find(gt_id);
  return it == mapping.assignment.end() ? none : it->second;
}

}  // namespace

std::vector<double> overlap_curve(const TrackRecord& gt, std::span<const TrackRecord> pred,
                                  const IdMapping& mapping) {
  const auto& credited = credited_for(mapping, gt.id);
  std::vector<double> curve;
  curve.reserve(gt.boxes.size());
  for (const auto& [f, box] : gt.boxes) {
    curve.push_back(std::max(0.0, credited_overlap(&box, f, credited, pred)));
  }
  return curve;
}

LengthInterval eao_interval(std::span<const int> lengths) {
  if (lengths.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "no lengths");
  std::vector<double> x(lengths.begin(), lengths.end());
  std::sort(x.begin(), x.end());
  const int lo = static_cast<int>(x.front()), hi = static_cast<int>(x.back());
  const std::set<double> distinct(x.begin(), x.end());
  if (distinct.size() < 3) return {1, hi};

  const auto n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  auto quantile = [&](double q) {
    const double pos = q * (n - 1.0);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    return i + 1 < x.size() ? x[i] + frac * (x[i + 1] - x[i]) : x[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  double h = 0.9 * spread * std::pow(n, -0.2);
  if (!(h > 0.0)) h = 1.0;

  std::vector<double> density;
  for (int k = lo; k <= hi; ++k) {
    double d = 0.0;
    for (double v : x) d += std::exp(-0.5 * std::pow((k - v) / h, 2.0));
    density.push_back(d);
  }
  const double total = std::accumulate(density.begin(), density.end(), 0.0);
  std::size_t a = static_cast<std::size_t>(
      std::distance(density.begin(), std::max_element(density.begin(), density.end())));
  std::size_t b = a;
  double mass = density[a];
  while (mass < 0.5 * total) {
    const bool can_left = a > 0, can_right = b + 1 < density.size();
    if (can_left && (!can_right || density[a - 1] >= density[b + 1])) {
      mass += density[--a];
    } else {
      mass += density[++b];
    }
  }
  return {lo + static_cast<int>(a), lo + static_cast<int>(b)};
}

double track_eao(std::span<const double> curve, LengthInterval interval) {
  if (curve.empty()) return 0.0;
  const int len = static_cast<int>(curve.size());
  std::vector<double> prefix(curve.size() + 1, 0.0);
  for (std::size_t i = 0; i < curve.size(); ++i) prefix[i + 1] = prefix[i] + curve[i];
  auto avg = [&](int ns) { return prefix[static_cast<std::size_t>(ns)] / ns; };
  if (len < interval.lo) return avg(len);
  const int top = std::min(interval.hi, len);
  double acc = 0.0;
  for (int ns = std::max(1, interval.lo); ns <= top; ++ns) acc += avg(ns);
  return acc / (top - std::max(1, interval.lo) + 1);
}

double eao(std::span<const TrackRecord> gt, std::span<const TrackRecord> pred, double iou_min,
           IdMode mode) {
  std::vector<int> lengths;
  for (const auto& g : gt) {
    if (!g.boxes.empty()) lengths.push_back(static_cast<int>(g.boxes.size()));
  }
  if (lengths.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "ground truth has no boxes");
  const IdMapping mapping = map_ids(gt, pred, iou_min, mode);
  const LengthInterval interval = eao_interval(lengths);
  double acc = 0.0;
  for (const auto& g : gt) {
    if (g.boxes.empty()) continue;
    const auto curve = overlap_curve(g, pred, mapping);
    acc += track_eao(curve, interval);
  }
  return acc / static_cast<double>(lengths.size());
}

SummaryMetrics summary_metrics(std::span<const TrackRecord> gt, std::span<const TrackRecord> pred,
                               const IdMapping& mapping, double iou_min) {
  SummaryMetrics out;
  std::int64_t first = 0, last = -1;
  bool any = false;
  for (const auto& g : gt) {
    if (g.boxes.empty()) continue;
    first = any ? std::min(first, g.boxes.begin()->first) : g.boxes.begin()->first;
    last = any ? std::max(last, g.boxes.rbegin()->first) : g.boxes.rbegin()->first;
    any = true;
  }
  double gt_present = 0.0, hits = 0.0, absent = 0.0, absent_ok = 0.0;
  for (const auto& g : gt) {
    const auto& credited = credited_for(mapping, g.id);
    for (std::int64_t f = first; any && f <= last; ++f) {
      const auto it = g.boxes.find(f);
      if (it != g.boxes.end()) {
        gt_present += 1.0;
        if (credited_overlap(&it->second, f, credited, pred) >= iou_min) hits += 1.0;
      } else {
        absent += 1.0;
        if (credited_overlap(nullptr, f, credited, pred) < 0.0) absent_ok += 1.0;
      }
    }
  }
  out.recall = gt_present > 0.0 ? hits / gt_present : 0.0;
  out.absence_accuracy = absent > 0.0 ? absent_ok / absent : 1.0;

  // A predicted box is correct when it overlaps, at >= iou_min, a gt box
  // whose id credits it at that frame.
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, std::int64_t>>> credit_of_pred;
  for (const auto& [gid, credited] : mapping.assignment) {
    for (const CreditedId& c : credited) credit_of_pred[c.pred_id].emplace_back(gid, c.from_frame);
  }
  auto correct_box = [&](std::int64_t pred_id, std::int64_t f, const BoundingBox& box) {
    const auto it = credit_of_pred.find(pred_id);
    if (it == credit_of_pred.end()) return false;
    for (const auto& [gid, from] : it->second) {
      if (from > f) continue;
      for (const auto& g : gt) {
        if (g.id != gid) continue;
        const auto gb = g.boxes.find(f);
        if (gb != g.boxes.end() && iou(gb->second, box) >= iou_min) return true;
      }
    }
    return false;
  };
  double pred_boxes = 0.0, correct = 0.0;
  for (const auto& p : pred) {
    for (const auto& [f, box] : p.boxes) {
      pred_boxes += 1.0;
      if (correct_box(p.id, f, box)) correct += 1.0;
    }
  }
  out.precision = pred_boxes > 0.0 ? correct / pred_boxes : 1.0;
  return out;
}

std::vector<MetricsRow> evaluate(std::span<const TrackRecord> gt, std::span<const TrackRecord> pred,
                                 double iou_min) {
  std::vector<MetricsRow> rows;
  for (IdMode mode : {IdMode::kOUID, IdMode::kAUID}) {
    MetricsRow row;
    row.mode = mode;
    row.eao = eao(gt, pred, iou_min, mode);
    row.summary = summary_metrics(gt, pred, map_ids(gt, pred, iou_min, mode), iou_min);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace airtrack::eval
