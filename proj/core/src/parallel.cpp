#include "fockfk/parallel.hpp"

namespace fockfk {

namespace {
int g_jobs = 0;
}

int worker_count() { return g_jobs; }

void set_worker_count(int jobs) { g_jobs = jobs < 0 ? 0 : jobs; }

}  // namespace fockfk
