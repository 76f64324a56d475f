#include "egoloc/motion/labels.hpp"

#include <sstream>

#include "egoloc/error.hpp"
#include "egoloc/io.hpp"

namespace egoloc::motion {

std::vector<SecondLabel> ground_truth_labels(const Trajectory& tr, const ActionScript& script,
                                             const world::SegmentGrid& grid) {
  const auto r = static_cast<std::size_t>(tr.rate_hz);
  const std::size_t secs = tr.size() / r;
  std::vector<SecondLabel> out(secs);
  for (std::size_t k = 0; k < secs; ++k) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = k * r; i < (k + 1) * r; ++i) {
      mx += tr.x[i];
      my += tr.y[i];
    }
    mx /= static_cast<double>(r);
    my /= static_cast<double>(r);
    auto& l = out[k];
    l.x = mx;
    l.y = my;
    l.segment = world::nearest_segment(mx, my, grid);
    l.action = script[episode_at(script, static_cast<double>(k) + 0.5)].action;
    l.heading = tr.heading[k * r];
  }
  return out;
}

std::string labels_to_csv(const std::vector<SecondLabel>& labels) {
  std::string out = "t,segment,action,x,y,heading\n";
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const auto& l = labels[t];
    out += std::to_string(t) + "," + std::to_string(l.segment) + "," + std::to_string(l.action) + "," +
           io::fmt_double(l.x) + "," + io::fmt_double(l.y) + "," + io::fmt_double(l.heading) + "\n";
  }
  return out;
}

std::vector<SecondLabel> labels_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,segment,action", 0) != 0) throw DataError("labels: missing header");
  std::vector<SecondLabel> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[6];
    for (auto& s : f) {
      if (!std::getline(ls, s, ',')) throw DataError("labels: short row '" + line + "'");
    }
    try {
      if (std::stoul(f[0]) != out.size()) throw DataError("labels: rows out of order");
      SecondLabel l;
      l.segment = std::stoi(f[1]);
      l.action = std::stoi(f[2]);
      l.x = std::stod(f[3]);
      l.y = std::stod(f[4]);
      l.heading = std::stod(f[5]);
      out.push_back(l);
    } catch (const std::logic_error&) {
      throw DataError("labels: malformed row '" + line + "'");
    }
  }
  return out;
}

}  // namespace egoloc::motion
