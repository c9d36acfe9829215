from autodiff.tensor import ComputeGraph, Function, Tensor, as_tensor, grad, is_grad_enabled, no_grad
from autodiff.nn import Linear, MLP, Module, Parameter
from autodiff.gradcheck import GradCheckReport, check_tensors, grad_check, grad_check_report

__all__ = [
    "ComputeGraph", "Function", "Tensor", "as_tensor", "grad", "is_grad_enabled", "no_grad",
    "Linear", "MLP", "Module", "Parameter",
    "GradCheckReport", "check_tensors", "grad_check", "grad_check_report",
]
