#include "docloop/text_layer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace docloop {

namespace {

bool ends_with_space(const std::string& s) { return !s.empty() && std::isspace(static_cast<unsigned char>(s.back())); }

bool starts_with_space(const std::string& s) {
  return !s.empty() && std::isspace(static_cast<unsigned char>(s.front()));
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

TextLine line_from_runs(std::vector<const TextRun*>& runs) {
  std::sort(runs.begin(), runs.end(), [](const TextRun* a, const TextRun* b) { return a->x0 < b->x0; });
  TextLine line;
  line.x0 = runs.front()->x0;
  line.y0 = runs.front()->y0;
  line.x1 = runs.front()->x1;
  line.y1 = runs.front()->y1;
  double prev_x1 = runs.front()->x0;
  for (const TextRun* r : runs) {
    double gap = r->x0 - prev_x1;
    if (!line.text.empty() && gap > 0.15 * r->font_size && !ends_with_space(line.text) && !starts_with_space(r->text)) {
      line.text.push_back(' ');
    }
    line.text += r->text;
    line.x0 = std::min(line.x0, r->x0);
    line.y0 = std::min(line.y0, r->y0);
    line.x1 = std::max(line.x1, r->x1);
    line.y1 = std::max(line.y1, r->y1);
    line.font_size = std::max(line.font_size, r->font_size);
    prev_x1 = r->x1;
  }
  line.text = trim(line.text);
  return line;
}

}  // namespace

std::string Paragraph::text() const {
  std::string out;
  for (const auto& line : lines) {
    if (line.text.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += line.text;
  }
  return out;
}

std::vector<TextLine> group_lines(const PageText& page) {
  std::vector<const TextRun*> runs;
  for (const auto& r : page.runs) runs.push_back(&r);
  std::stable_sort(runs.begin(), runs.end(), [](const TextRun* a, const TextRun* b) {
    if (a->y1 != b->y1) return a->y1 < b->y1;
    return a->x0 < b->x0;
  });

  std::vector<TextLine> lines;
  std::size_t i = 0;
  while (i < runs.size()) {
    double baseline = runs[i]->y1;
    double tolerance = 0.5 * std::max(runs[i]->font_size, 1.0);
    std::size_t j = i;
    while (j < runs.size() && std::abs(runs[j]->y1 - baseline) <= tolerance) ++j;
    std::vector<const TextRun*> cluster(runs.begin() + static_cast<std::ptrdiff_t>(i),
                                        runs.begin() + static_cast<std::ptrdiff_t>(j));
    std::sort(cluster.begin(), cluster.end(), [](const TextRun* a, const TextRun* b) { return a->x0 < b->x0; });
    // A wide horizontal gap separates columns sharing a baseline.
    std::vector<const TextRun*> segment;
    for (const TextRun* r : cluster) {
      if (!segment.empty() && r->x0 - segment.back()->x1 > 3.0 * r->font_size) {
        lines.push_back(line_from_runs(segment));
        segment.clear();
      }
      segment.push_back(r);
    }
    if (!segment.empty()) lines.push_back(line_from_runs(segment));
    i = j;
  }
  lines.erase(std::remove_if(lines.begin(), lines.end(), [](const TextLine& l) { return l.text.empty(); }),
              lines.end());
  std::stable_sort(lines.begin(), lines.end(), [](const TextLine& a, const TextLine& b) {
    if (std::abs(a.y1 - b.y1) > 0.5 * std::max(1.0, std::min(a.font_size, b.font_size))) return a.y1 < b.y1;
    return a.x0 < b.x0;
  });
  return lines;
}

std::vector<Paragraph> group_paragraphs(const std::vector<TextLine>& lines) {
  std::vector<Paragraph> out;
  for (const auto& line : lines) {
    bool start_new = out.empty();
    if (!start_new) {
      const TextLine& prev = out.back().lines.back();
      double size = std::max(prev.font_size, line.font_size);
      double delta = line.y1 - prev.y1;
      double ratio = std::max(prev.font_size, line.font_size) / std::max(1e-6, std::min(prev.font_size, line.font_size));
      bool overlaps = line.x0 < prev.x1 && prev.x0 < line.x1;
      start_new = delta > 1.6 * size || delta < 0 || ratio > 1.2 || !overlaps;
    }
    if (start_new) {
      Paragraph p;
      p.x0 = line.x0;
      p.y0 = line.y0;
      p.x1 = line.x1;
      p.y1 = line.y1;
      p.font_size = line.font_size;
      out.push_back(std::move(p));
    }
    Paragraph& p = out.back();
    p.lines.push_back(line);
    p.x0 = std::min(p.x0, line.x0);
    p.y0 = std::min(p.y0, line.y0);
    p.x1 = std::max(p.x1, line.x1);
    p.y1 = std::max(p.y1, line.y1);
    p.font_size = std::max(p.font_size, line.font_size);
  }
  return out;
}

std::string text_in_box(const PageText& page, const BoundingBox& box) {
  std::string out;
  for (const auto& line : group_lines(page)) {
    double cx = 0.5 * (line.x0 + line.x1);
    double cy = 0.5 * (line.y0 + line.y1);
    if (cx < box.x0 || cx > box.x1 || cy < box.y0 || cy > box.y1) continue;
    if (!out.empty()) out.push_back(' ');
    out += line.text;
  }
  return out;
}

double body_font_size(const std::vector<TextLine>& lines) {
  std::map<double, std::size_t> chars;
  for (const auto& l : lines) chars[l.font_size] += l.text.size();
  double best = 0.0;
  std::size_t most = 0;
  for (const auto& [size, n] : chars) {
    if (n > most) {
      best = size;
      most = n;
    }
  }
  return best;
}

}  // namespace docloop
