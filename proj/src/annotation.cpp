#include "tempokit/annotation.hpp"
#include "tempokit/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tempokit {

std::vector<double> load_beats_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::file_not_found, path);
    std::vector<double> times;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream iss(line);
        double t;
        if (!(iss >> t)) raise(Errc::malformed_header, path + ": bad beat line '" + line + "'");
        if (!times.empty() && t <= times.back()) {
            raise(Errc::malformed_header, path + ": beat times must be strictly ascending");
        }
        times.push_back(t);
    }
    return times;
}

void save_beats_text(const std::string& path, const std::vector<double>& times) {
    std::ofstream out(path);
    if (!out) raise(Errc::file_not_found, "cannot open for writing: " + path);
    char buf[64];
    for (double t : times) {
        std::snprintf(buf, sizeof(buf), "%.6f\n", t);
        out << buf;
    }
}

} // namespace tempokit
