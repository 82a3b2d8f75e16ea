#include "udi/svg.hpp"

#include <cstdio>
#include <fstream>

#include "udi/errors.hpp"

namespace udi {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* kPalette[] = {"#4878cf", "#e24a33", "#6acc65", "#d65f5f", "#956cb4", "#8c613c"};

}  // namespace

void write_grouped_bar_svg(const std::string& path, const std::string& title,
                           const std::vector<std::string>& group_names,
                           const std::vector<std::string>& series_names,
                           const std::vector<std::vector<double>>& values) {
  if (values.size() != group_names.size())
    throw ContractError("svg: values rows must match group count");
  for (const auto& row : values)
    if (row.size() != series_names.size())
      throw ContractError("svg: values columns must match series count");

  const int bar_w = 34, gap = 10, group_gap = 40;
  const int plot_h = 260, margin_l = 60, margin_t = 50, margin_b = 60;
  const int group_w = static_cast<int>(series_names.size()) * (bar_w + gap) + group_gap;
  const int width = margin_l + group_w * static_cast<int>(group_names.size()) + 40;
  const int height = margin_t + plot_h + margin_b;

  std::ofstream os(path);
  if (!os) throw ParseError("cannot write svg: " + path);
  char buf[256];
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n",
                width, height, width, height);
  os << buf;
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"15\">" << xml_escape(title) << "</text>\n";

  // y axis with 0..1 grid lines
  for (int tick = 0; tick <= 5; ++tick) {
    const double frac = tick / 5.0;
    const int y = margin_t + plot_h - static_cast<int>(frac * plot_h);
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"#dddddd\"/>\n",
                  margin_l, y, width - 20, y);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"end\" font-family=\"sans-serif\" "
                  "font-size=\"11\">%.1f</text>\n",
                  margin_l - 6, y + 4, frac);
    os << buf;
  }

  for (std::size_t g = 0; g < group_names.size(); ++g) {
    const int gx = margin_l + static_cast<int>(g) * group_w + group_gap / 2;
    for (std::size_t s = 0; s < series_names.size(); ++s) {
      double v = values[g][s];
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      const int h = static_cast<int>(v * plot_h);
      const int x = gx + static_cast<int>(s) * (bar_w + gap);
      const int y = margin_t + plot_h - h;
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\"/>\n", x, y,
                    bar_w, h, kPalette[s % 6]);
      os << buf;
      std::snprintf(buf, sizeof(buf),
                    "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                    "font-size=\"10\">%.3f</text>\n",
                    x + bar_w / 2, y - 4, values[g][s]);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                  "font-size=\"12\">%s</text>\n",
                  gx + (static_cast<int>(series_names.size()) * (bar_w + gap)) / 2 - gap / 2,
                  margin_t + plot_h + 20, xml_escape(group_names[g]).c_str());
    os << buf;
  }

  // legend
  int lx = margin_l;
  const int ly = height - 18;
  for (std::size_t s = 0; s < series_names.size(); ++s) {
    std::snprintf(buf, sizeof(buf), "<rect x=\"%d\" y=\"%d\" width=\"12\" height=\"12\" fill=\"%s\"/>\n",
                  lx, ly - 10, kPalette[s % 6]);
    os << buf;
    os << "<text x=\"" << lx + 16 << "\" y=\"" << ly
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(series_names[s])
       << "</text>\n";
    lx += 16 + 9 * static_cast<int>(series_names[s].size()) + 24;
  }

  os << "</svg>\n";
}

}  // namespace udi
