import typing as T
import contextlib
import contextvars

import numpy as np
import numpy.typing as npt

from descatter.errors import ShapeError, StateError

DEFAULT_DTYPE = np.float32

Array = npt.NDArray[np.floating[T.Any]]

# per thread: worker threads start from the default, not from the caller's setting
_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "descatter_grad_enabled", default=True
)


@contextlib.contextmanager
def no_grad() -> T.Iterator[None]:
    """forward passes inside this block record no graph"""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


class Function:
    """
    A differentiable op. `forward` receives the raw arrays of the inputs,
    `backward` receives d(loss)/d(output) and returns one gradient (or None) per input.
    """

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs
        self.needs_input_grad = tuple(t.requires_grad for t in inputs)

    def forward(self, *arrays: Array, **kwargs: T.Any) -> Array:
        raise NotImplementedError

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: "Tensor", **kwargs: T.Any) -> "Tensor":
        func = cls(*inputs)
        out = func.forward(*(t.data for t in inputs), **kwargs)
        requires_grad = _grad_enabled.get() and any(func.needs_input_grad)
        return Tensor(out, requires_grad=requires_grad, creator=func if requires_grad else None)


class Tensor:
    def __init__(
        self,
        data: npt.ArrayLike,
        *,
        requires_grad: bool = False,
        creator: Function | None = None,
    ):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: Array = arr
        self.requires_grad = requires_grad
        self.creator = creator
        self.grad: Array | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def dtype(self) -> np.dtype[T.Any]:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> Array:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def _topological_order(self) -> list["Tensor"]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, children_done = stack.pop()
            if id(node) in visited:
                continue
            if children_done:
                visited.add(id(node))
                order.append(node)
                continue
            stack.append((node, True))
            if node.creator is not None:
                for parent in node.creator.inputs:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return order

    def backward(self) -> None:
        """
        Reverse-mode pass from a scalar. Leaf gradients are overwritten, not accumulated,
        so calling backward twice on the same graph gives the same grads.
        """
        if self.creator is None:
            raise StateError(
                "backward() needs a tensor produced by a recorded forward pass.",
                extensions={"shape": self.shape, "requires_grad": self.requires_grad},
            )
        if self.data.size != 1:
            raise ShapeError(
                "backward() starts from a scalar loss.", extensions={"shape": self.shape}
            )

        grads: dict[int, Array] = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.creator is None:
                node.grad = np.array(g, dtype=node.data.dtype).reshape(node.shape)
                continue
            input_grads = node.creator.backward(g)
            for parent, pg in zip(node.creator.inputs, input_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    def __init__(self, value: npt.ArrayLike, *, name: str):
        super().__init__(value, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    @property
    def value(self) -> Array:
        return self.data

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.shape}, dtype={self.dtype})"


__all__ = [
    "Tensor",
    "Parameter",
    "Function",
    "Array",
    "no_grad",
    "is_grad_enabled",
    "DEFAULT_DTYPE",
]
