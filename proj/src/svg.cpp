#include "lbf/svg.hpp"

#include <cmath>
#include <fstream>

namespace lbf {

void write_arc_csv(const std::string& path, const HybridArc& arc) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write arc csv: " + path);
    out << "t,j";
    if (!arc.points.empty())
        for (size_t i = 0; i < arc.points[0].x.size(); ++i) out << ",s" << (i + 1);
    out << "\n";
    char buf[64];
    for (const auto& p : arc.points) {
        std::snprintf(buf, sizeof buf, "%.12g", p.t);
        out << buf << "," << p.j;
        for (double v : p.x) {
            std::snprintf(buf, sizeof buf, "%.12g", v);
            out << "," << buf;
        }
        out << "\n";
    }
}

namespace {

struct Mapper {
    double x0, x1, y0, y1;
    int size;
    double margin = 40;

    double px(double x) const {
        return margin + (x - x0) / (x1 - x0) * (size - 2 * margin);
    }
    double py(double y) const {
        return size - margin - (y - y0) / (y1 - y0) * (size - 2 * margin);
    }
};

std::string rect(const Mapper& m, const Interval& bx, const Interval& by,
                 const char* style) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" %s/>\n",
                  m.px(bx.lo), m.py(by.hi), m.px(bx.hi) - m.px(bx.lo),
                  m.py(by.lo) - m.py(by.hi), style);
    return buf;
}

// marching squares over the sampled grid for one level line
std::string contour(const Mapper& m, const std::vector<std::vector<double>>& grid,
                    double level, double gx0, double gx1, double gy0, double gy1,
                    const char* color) {
    const int n = static_cast<int>(grid.size());
    std::string out;
    char buf[256];
    auto X = [&](int i) { return gx0 + (gx1 - gx0) * i / (n - 1); };
    auto Y = [&](int j) { return gy0 + (gy1 - gy0) * j / (n - 1); };
    auto lerp = [&](double a, double b, double va, double vb) {
        double t = (level - va) / (vb - va);
        return a + t * (b - a);
    };
    for (int i = 0; i + 1 < n; ++i) {
        for (int j = 0; j + 1 < n; ++j) {
            double v00 = grid[i][j], v10 = grid[i + 1][j];
            double v01 = grid[i][j + 1], v11 = grid[i + 1][j + 1];
            if (!std::isfinite(v00) || !std::isfinite(v10) || !std::isfinite(v01) ||
                !std::isfinite(v11))
                continue;
            struct Pt { double x, y; };
            Pt pts[4];
            int np = 0;
            // edge crossings
            if ((v00 < level) != (v10 < level))
                pts[np++] = {lerp(X(i), X(i + 1), v00, v10), Y(j)};
            if ((v10 < level) != (v11 < level))
                pts[np++] = {X(i + 1), lerp(Y(j), Y(j + 1), v10, v11)};
            if ((v01 < level) != (v11 < level))
                pts[np++] = {lerp(X(i), X(i + 1), v01, v11), Y(j + 1)};
            if ((v00 < level) != (v01 < level))
                pts[np++] = {X(i), lerp(Y(j), Y(j + 1), v00, v01)};
            for (int k = 0; k + 1 < np; k += 2) {
                std::snprintf(buf, sizeof buf,
                              "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                              "stroke=\"%s\" stroke-width=\"1.5\"/>\n",
                              m.px(pts[k].x), m.py(pts[k].y), m.px(pts[k + 1].x),
                              m.py(pts[k + 1].y), color);
                out += buf;
            }
        }
    }
    return out;
}

} // namespace

void write_phase_svg(const std::string& path, const SpecSets& sets,
                     const StatePartition& part, const std::optional<Expr>& V,
                     std::optional<double> beta,
                     const std::vector<HybridArc>& arcs, const PlotOptions& opts) {
    const int dx = opts.dim_x, dy = opts.dim_y;
    if (dx >= part.n_x || dy >= part.n_x)
        throw ModelError("plot projection dims must be continuous states");

    Interval bx = sets.S_x[dx], by = sets.S_x[dy];
    double mx = 0.08 * bx.width(), my = 0.08 * by.width();
    Mapper m{bx.lo - mx, bx.hi + mx, by.lo - my, by.hi + my, opts.size};

    std::ofstream out(path);
    if (!out) throw ModelError("cannot write svg: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.size
        << "\" height=\"" << opts.size << "\" viewBox=\"0 0 " << opts.size << " "
        << opts.size << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    out << rect(m, sets.S_x[dx], sets.S_x[dy],
                "fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"");
    out << rect(m, sets.I_x[dx], sets.I_x[dy],
                "fill=\"#4169e11a\" stroke=\"royalblue\" stroke-width=\"1\"");
    out << rect(m, sets.O_x[dx], sets.O_x[dy],
                "fill=\"#2e8b571a\" stroke=\"seagreen\" stroke-width=\"1\"");

    if (V) {
        // sample V on the projection plane; remaining coordinates at the
        // center of O (timers at 0)
        std::vector<double> point(part.n(), 0.0);
        for (int i = 0; i < part.n_x; ++i) point[i] = sets.O_x[i].mid();
        for (int i = 0; i < part.n_q; ++i) {
            const auto& d = sets.O_q[i];
            point[part.q_offset() + i] = d.finite ? d.values.front() : d.box.mid();
        }
        const int n = opts.grid;
        std::vector<std::vector<double>> grid(n, std::vector<double>(n));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                point[dx] = m.x0 + (m.x1 - m.x0) * i / (n - 1);
                point[dy] = m.y0 + (m.y1 - m.y0) * j / (n - 1);
                grid[i][j] = eval(*V, point);
            }
        }
        out << contour(m, grid, 0.0, m.x0, m.x1, m.y0, m.y1, "crimson");
        if (beta) out << contour(m, grid, *beta, m.x0, m.x1, m.y0, m.y1, "darkorange");
    }

    for (const auto& arc : arcs) {
        std::string poly = "<polyline fill=\"none\" stroke=\"#333\" stroke-width=\"1\" points=\"";
        char buf[64];
        for (const auto& p : arc.points) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", m.px(p.x[dx]), m.py(p.x[dy]));
            poly += buf;
        }
        poly += "\"/>\n";
        out << poly;
    }

    char lbl[256];
    std::snprintf(lbl, sizeof lbl,
                  "<text x=\"%d\" y=\"20\" font-size=\"13\" font-family=\"sans-serif\">"
                  "S black, I blue, O green, V=0 red%s</text>\n",
                  10, beta ? ", V=beta orange" : "");
    out << lbl;
    out << "</svg>\n";
}

} // namespace lbf
