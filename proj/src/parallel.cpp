#include "ddim/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

namespace ddim {

namespace {

int initial_threads() {
    if (const char* env = std::getenv("DDIM_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
    }
    return std::max(1, omp_get_num_procs());
}

int& thread_cap() {
    static int cap = [] {
        int n = initial_threads();
        omp_set_num_threads(n);
        return n;
    }();
    return cap;
}

}  // namespace

int num_threads() { return thread_cap(); }

void set_num_threads(int n) {
    thread_cap() = std::max(1, n);
    omp_set_num_threads(thread_cap());
}

}  // namespace ddim
