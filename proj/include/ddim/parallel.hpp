#pragma once

namespace ddim {

// Kernel thread cap. Defaults to DDIM_THREADS when set, else the hardware count.
int num_threads();
void set_num_threads(int n);

}  // namespace ddim
