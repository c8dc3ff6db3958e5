#pragma once
// Umbrella header for the backdoored-diffusion lab.

#include "dataset.hpp"
#include "defense.hpp"
#include "denoiser.hpp"
#include "diffusion.hpp"
#include "experiment.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "optimizer.hpp"
#include "oracle.hpp"
#include "poison.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "schedule.hpp"
#include "tensor.hpp"
#include "training.hpp"
#include "verify.hpp"
